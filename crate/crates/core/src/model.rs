//! Rate schedules and the generators of the catastrophe-free process `Q̂`,
//! the full process `Q = Q̂ + Q_d`, and the absorbed chain `Q̃` on
//! `S = {-2, -1, 0, 1, ...}`.
//!
//! Generator rows are produced one level at a time so that every consumer
//! (resolvent solves, uniformization, simulation) reads rates from a single
//! place. Truncated generators use a killed boundary: at the truncation level
//! `N` the birth transition to `N + 1` is removed while the diagonal keeps
//! `-ω_N`, so the last row is defective.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Birth rates `λ_i` (i ≥ 0) and death rates `μ_i` (i ≥ 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSchedule {
    /// `λ_i ≡ birth`, `μ_i ≡ death`.
    Constant { birth: f64, death: f64 },
    /// `λ_i = birth_slope·(i+1) + birth_offset`, `μ_i = death_slope·i + death_offset`.
    Affine {
        birth_slope: f64,
        #[serde(default)]
        birth_offset: f64,
        death_slope: f64,
        #[serde(default)]
        death_offset: f64,
    },
    /// Explicit tables; `birth[k] = λ_k` and `death[k] = μ_{k+1}`. Levels past
    /// the end of a table repeat its last entry.
    Table { birth: Vec<f64>, death: Vec<f64> },
}

impl RateSchedule {
    pub fn constant(birth: f64, death: f64) -> Self {
        RateSchedule::Constant { birth, death }
    }

    pub fn affine(birth_slope: f64, birth_offset: f64, death_slope: f64, death_offset: f64) -> Self {
        RateSchedule::Affine {
            birth_slope,
            birth_offset,
            death_slope,
            death_offset,
        }
    }

    pub fn table(birth: Vec<f64>, death: Vec<f64>) -> Self {
        RateSchedule::Table { birth, death }
    }

    /// `λ_i`.
    pub fn birth(&self, level: usize) -> f64 {
        match self {
            RateSchedule::Constant { birth, .. } => *birth,
            RateSchedule::Affine {
                birth_slope,
                birth_offset,
                ..
            } => birth_slope * (level as f64 + 1.0) + birth_offset,
            RateSchedule::Table { birth, .. } => table_lookup(birth, level),
        }
    }

    /// `μ_i`, with `μ_0 = 0`.
    pub fn death(&self, level: usize) -> f64 {
        if level == 0 {
            return 0.0;
        }
        match self {
            RateSchedule::Constant { death, .. } => *death,
            RateSchedule::Affine {
                death_slope,
                death_offset,
                ..
            } => death_slope * level as f64 + death_offset,
            RateSchedule::Table { death, .. } => table_lookup(death, level - 1),
        }
    }

    /// `ω_i = λ_i + μ_i` for i ≥ 1 and `λ_0` at level 0.
    pub fn omega(&self, level: usize) -> f64 {
        self.birth(level) + self.death(level)
    }

    /// Levels at which the rule is not yet in its final regime; checking
    /// these plus the asymptotic behaviour covers every level.
    fn explicit_levels(&self) -> usize {
        match self {
            RateSchedule::Constant { .. } => 1,
            RateSchedule::Affine { .. } => 2,
            RateSchedule::Table { birth, death } => birth.len().max(death.len() + 1).max(1),
        }
    }
}

fn table_lookup(table: &[f64], index: usize) -> f64 {
    match table.get(index) {
        Some(v) => *v,
        None => table.last().copied().unwrap_or(f64::NAN),
    }
}

/// Catastrophe intensities. `gamma` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatastropheRates {
    pub alpha: f64,
    pub beta: f64,
}

impl CatastropheRates {
    pub const NONE: CatastropheRates = CatastropheRates {
        alpha: 0.0,
        beta: 0.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Self {
        CatastropheRates { alpha, beta }
    }

    pub fn gamma(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn has_catastrophe(&self) -> bool {
        self.gamma() > 0.0
    }
}

/// The model block of a configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub rates: RateSchedule,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelSpec {
    pub fn catastrophes(&self) -> CatastropheRates {
        CatastropheRates::new(self.alpha, self.beta)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_model(&self.rates, &self.catastrophes())
    }
}

/// Controls how the infinite state space is cut for numerical work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationPolicy {
    pub initial_level: usize,
    pub max_level: usize,
    pub rel_tol: f64,
    pub growth_factor: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            initial_level: 64,
            max_level: 1 << 20,
            rel_tol: 1e-10,
            growth_factor: 2,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.initial_level < 8 {
            return Err(Error::InvalidInput(format!(
                "initial_level must be >= 8 (got {})",
                self.initial_level
            )));
        }
        if self.initial_level >= self.max_level {
            return Err(Error::InvalidInput(format!(
                "initial_level ({}) must be < max_level ({})",
                self.initial_level, self.max_level
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rel_tol must lie in (0, 1) (got {})",
                self.rel_tol
            )));
        }
        if self.growth_factor < 2 {
            return Err(Error::InvalidInput(format!(
                "growth_factor must be >= 2 (got {})",
                self.growth_factor
            )));
        }
        Ok(())
    }

    /// Truncation levels visited by the refinement loop, starting from the
    /// first level that is at least `floor` (capped at `max_level`).
    pub fn levels(&self, floor: usize) -> impl Iterator<Item = usize> + '_ {
        let mut next = Some(self.initial_level.min(self.max_level));
        while let Some(n) = next {
            if n >= floor || n >= self.max_level {
                break;
            }
            next = Some((n * self.growth_factor).min(self.max_level));
        }
        std::iter::successors(next, move |&n| {
            if n >= self.max_level {
                None
            } else {
                Some((n * self.growth_factor).min(self.max_level))
            }
        })
    }
}

/// A state of the absorbed chain. Ordering follows `-2 < -1 < 0 < 1 < ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    /// State `-2`: the first effective catastrophe was of α-type.
    AlphaAbsorbed,
    /// State `-1`: the first effective catastrophe was of β-type.
    BetaAbsorbed,
    Level(usize),
}

impl State {
    pub fn as_signed(self) -> i64 {
        match self {
            State::AlphaAbsorbed => -2,
            State::BetaAbsorbed => -1,
            State::Level(n) => n as i64,
        }
    }

    pub fn from_signed(value: i64) -> Option<State> {
        match value {
            -2 => Some(State::AlphaAbsorbed),
            -1 => Some(State::BetaAbsorbed),
            n if n >= 0 => Some(State::Level(n as usize)),
            _ => None,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_signed())
    }
}

/// One row of a generator, stored sparsely (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRow {
    pub level: State,
    pub entries: BTreeMap<State, f64>,
}

impl GeneratorRow {
    fn new(level: State) -> Self {
        GeneratorRow {
            level,
            entries: BTreeMap::new(),
        }
    }

    fn add(&mut self, column: State, rate: f64) {
        if rate != 0.0 {
            *self.entries.entry(column).or_insert(0.0) += rate;
        }
    }

    pub fn get(&self, column: State) -> f64 {
        self.entries.get(&column).copied().unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.get(self.level)
    }

    pub fn row_sum(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Entries keyed by plain level, for rows that never touch the absorbing
    /// states.
    pub fn level_entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().filter_map(|(s, &v)| match s {
            State::Level(n) => Some((*n, v)),
            _ => None,
        })
    }
}

/// A constraint of the model that the inputs violate.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BirthRate { level: usize, value: f64 },
    DeathRate { level: usize, value: f64 },
    Alpha(f64),
    Beta(f64),
    EmptyTable(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BirthRate { level, value } => {
                write!(f, "lambda_{level} must be > 0 (got {value})")
            }
            Violation::DeathRate { level, value } => {
                write!(f, "mu_{level} must be > 0 (got {value})")
            }
            Violation::Alpha(v) => write!(f, "alpha must be >= 0 (got {v})"),
            Violation::Beta(v) => write!(f, "beta must be >= 0 (got {v})"),
            Violation::EmptyTable(which) => write!(f, "{which} table must not be empty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_model(schedule: &RateSchedule, cat: &CatastropheRates) -> ValidationReport {
    let mut violations = Vec::new();

    if let RateSchedule::Table { birth, death } = schedule {
        if birth.is_empty() {
            violations.push(Violation::EmptyTable("birth"));
        }
        if death.is_empty() {
            violations.push(Violation::EmptyTable("death"));
        }
    }

    if violations.is_empty() {
        // first failing level among the explicitly listed ones
        let explicit = schedule.explicit_levels();
        if let Some(level) = (0..explicit).find(|&i| !(schedule.birth(i) > 0.0 && schedule.birth(i).is_finite())) {
            violations.push(Violation::BirthRate {
                level,
                value: schedule.birth(level),
            });
        }
        if let Some(level) = (1..=explicit).find(|&i| !(schedule.death(i) > 0.0 && schedule.death(i).is_finite())) {
            violations.push(Violation::DeathRate {
                level,
                value: schedule.death(level),
            });
        }
        // affine rules with a negative slope eventually turn non-positive
        if let RateSchedule::Affine {
            birth_slope,
            birth_offset,
            death_slope,
            death_offset,
        } = *schedule
        {
            if birth_slope < 0.0 && !violations.iter().any(|v| matches!(v, Violation::BirthRate { .. })) {
                let level = ((-birth_offset / birth_slope) - 1.0).max(0.0).ceil() as usize;
                let level = (level..).find(|&i| schedule.birth(i) <= 0.0).unwrap_or(level);
                violations.push(Violation::BirthRate {
                    level,
                    value: schedule.birth(level),
                });
            }
            if death_slope < 0.0 && !violations.iter().any(|v| matches!(v, Violation::DeathRate { .. })) {
                let level = (-death_offset / death_slope).max(1.0).ceil() as usize;
                let level = (level..).find(|&i| schedule.death(i) <= 0.0).unwrap_or(level);
                violations.push(Violation::DeathRate {
                    level,
                    value: schedule.death(level),
                });
            }
        }
    }

    if !(cat.alpha >= 0.0 && cat.alpha.is_finite()) {
        violations.push(Violation::Alpha(cat.alpha));
    }
    if !(cat.beta >= 0.0 && cat.beta.is_finite()) {
        violations.push(Violation::Beta(cat.beta));
    }
    ValidationReport { violations }
}

/// Row `i` of `Q̂`.
pub fn hat_generator_row(schedule: &RateSchedule, i: usize) -> GeneratorRow {
    let mut row = GeneratorRow::new(State::Level(i));
    if i >= 1 {
        row.add(State::Level(i - 1), schedule.death(i));
    }
    row.add(State::Level(i), -schedule.omega(i));
    row.add(State::Level(i + 1), schedule.birth(i));
    row
}

/// Row `i` of `Q = Q̂ + Q_d`.
pub fn full_generator_row(schedule: &RateSchedule, cat: &CatastropheRates, i: usize) -> GeneratorRow {
    let mut row = hat_generator_row(schedule, i);
    let (alpha, beta) = (cat.alpha, cat.beta);
    match i {
        0 => {
            row.add(State::Level(1), beta);
            row.add(State::Level(0), -beta);
        }
        1 => {
            row.add(State::Level(0), alpha);
            row.add(State::Level(1), -alpha);
        }
        _ => {
            row.add(State::Level(0), alpha);
            row.add(State::Level(1), beta);
            row.add(State::Level(i), -cat.gamma());
        }
    }
    row
}

/// Row of `Q̃` for any state of `S`.
pub fn absorbed_generator_row(schedule: &RateSchedule, cat: &CatastropheRates, state: State) -> GeneratorRow {
    let i = match state {
        State::AlphaAbsorbed | State::BetaAbsorbed => return GeneratorRow::new(state),
        State::Level(i) => i,
    };
    let mut row = hat_generator_row(schedule, i);
    if i >= 1 {
        row.add(State::AlphaAbsorbed, cat.alpha);
        row.add(state, -cat.alpha);
    }
    if i != 1 {
        row.add(State::BetaAbsorbed, cat.beta);
        row.add(state, -cat.beta);
    }
    row
}

/// A generator restricted to levels `0..=N` with a killed boundary.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TruncatedGenerator {
    pub fn hat(schedule: &RateSchedule, truncation: usize) -> Self {
        Self::from_rows(truncation, |i| hat_generator_row(schedule, i))
    }

    pub fn full(schedule: &RateSchedule, cat: &CatastropheRates, truncation: usize) -> Self {
        Self::from_rows(truncation, |i| full_generator_row(schedule, cat, i))
    }

    fn from_rows(truncation: usize, row: impl Fn(usize) -> GeneratorRow) -> Self {
        let rows = (0..=truncation)
            .map(|i| row(i).level_entries().filter(|&(n, _)| n <= truncation).collect())
            .collect();
        TruncatedGenerator { rows }
    }

    pub fn truncation_level(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// `max_i |Q(i,i)|`.
    pub fn max_exit_rate(&self) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().find(|&&(n, _)| n == i).map_or(0.0, |&(_, v)| -v))
            .fold(0.0, f64::max)
    }

    /// `out = v · Q` for a row vector `v`.
    pub fn apply_left(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for &(n, q) in row {
                out[n] += vi * q;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> (RateSchedule, CatastropheRates) {
        (RateSchedule::constant(1.0, 1.25), CatastropheRates::new(0.4, 0.3))
    }

    fn entries(row: &GeneratorRow) -> Vec<(i64, f64)> {
        row.entries.iter().map(|(s, &v)| (s.as_signed(), v)).collect()
    }

    #[test]
    fn validate_examples() {
        let (sched, cat) = preset();
        assert!(validate_model(&sched, &cat).is_ok());

        let bad = RateSchedule::affine(1.0, -1.0, 1.0, 0.0);
        let report = validate_model(&bad, &cat);
        assert_eq!(report.violations, vec![Violation::BirthRate { level: 0, value: 0.0 }]);
        assert_eq!(report.violations[0].to_string(), "lambda_0 must be > 0 (got 0)");

        let report = validate_model(&sched, &CatastropheRates::new(-0.1, 0.3));
        assert_eq!(report.violations, vec![Violation::Alpha(-0.1)]);
        assert!(report.violations[0].to_string().contains("alpha must be >= 0"));
    }

    #[test]
    fn validate_catches_late_and_tabulated_failures() {
        let cat = CatastropheRates::NONE;
        let falling = RateSchedule::affine(-1.0, 10.0, 1.0, 0.0);
        let report = validate_model(&falling, &cat);
        assert_eq!(report.violations.len(), 1);
        match report.violations[0] {
            Violation::BirthRate { level, value } => {
                assert_eq!(level, 9);
                assert!(value <= 0.0);
                assert!(falling.birth(level - 1) > 0.0);
            }
            ref v => panic!("unexpected {v:?}"),
        }

        let table = RateSchedule::table(vec![1.0, 2.0, 0.0], vec![1.0]);
        assert_eq!(
            validate_model(&table, &cat).violations,
            vec![Violation::BirthRate { level: 2, value: 0.0 }]
        );
        let table = RateSchedule::table(vec![1.0], vec![]);
        assert_eq!(validate_model(&table, &cat).violations, vec![Violation::EmptyTable("death")]);
    }

    #[test]
    fn table_tail_repeats_last_entry() {
        let t = RateSchedule::table(vec![1.0, 2.0, 3.0], vec![0.5, 0.7]);
        assert_eq!(t.birth(2), 3.0);
        assert_eq!(t.birth(100), 3.0);
        assert_eq!(t.death(0), 0.0);
        assert_eq!(t.death(1), 0.5);
        assert_eq!(t.death(2), 0.7);
        assert_eq!(t.death(50), 0.7);
    }

    #[test]
    fn hat_rows() {
        let (sched, _) = preset();
        assert_eq!(entries(&hat_generator_row(&sched, 0)), vec![(0, -1.0), (1, 1.0)]);
        assert_eq!(
            entries(&hat_generator_row(&sched, 3)),
            vec![(2, 1.25), (3, -2.25), (4, 1.0)]
        );
    }

    #[test]
    fn full_rows() {
        let (sched, cat) = preset();
        let r0 = full_generator_row(&sched, &cat, 0);
        assert_eq!(r0.entries.len(), 2);
        assert!((r0.get(State::Level(0)) + 1.3).abs() < 1e-15);
        assert!((r0.get(State::Level(1)) - 1.3).abs() < 1e-15);
        let r1 = full_generator_row(&sched, &cat, 1);
        assert_eq!(r1.entries.len(), 3);
        assert!((r1.get(State::Level(0)) - 1.65).abs() < 1e-15);
        assert!((r1.get(State::Level(1)) + 2.65).abs() < 1e-15);
        assert_eq!(r1.get(State::Level(2)), 1.0);
        for i in 0..6 {
            assert_eq!(
                full_generator_row(&sched, &CatastropheRates::NONE, i),
                hat_generator_row(&sched, i)
            );
        }
    }

    #[test]
    fn absorbed_rows() {
        let (sched, cat) = preset();
        assert!(absorbed_generator_row(&sched, &cat, State::AlphaAbsorbed).entries.is_empty());
        assert!(absorbed_generator_row(&sched, &cat, State::BetaAbsorbed).entries.is_empty());

        let r1 = absorbed_generator_row(&sched, &cat, State::Level(1));
        let e1 = entries(&r1);
        assert_eq!(e1.len(), 4);
        assert_eq!(e1[0], (-2, 0.4));
        assert_eq!(e1[1], (0, 1.25));
        assert!((e1[2].1 + 2.65).abs() < 1e-15);
        assert_eq!(e1[3], (2, 1.0));

        let e2 = entries(&absorbed_generator_row(&sched, &cat, State::Level(2)));
        let expect = [(-2, 0.4), (-1, 0.3), (1, 1.25), (2, -2.95), (3, 1.0)];
        assert_eq!(e2.len(), expect.len());
        for ((s, v), (es, ev)) in e2.iter().zip(expect) {
            assert_eq!(*s, es);
            assert!((v - ev).abs() < 1e-15);
        }

        let r0 = absorbed_generator_row(&sched, &cat, State::Level(0));
        assert_eq!(r0.get(State::BetaAbsorbed), 0.3);
        assert_eq!(r0.get(State::AlphaAbsorbed), 0.0);
        assert!((r0.diagonal() + 1.3).abs() < 1e-15);
    }

    #[test]
    fn truncated_generator_is_killed_at_boundary() {
        let (sched, cat) = preset();
        let q = TruncatedGenerator::full(&sched, &cat, 10);
        assert_eq!(q.dim(), 11);
        let mut ones = vec![0.0; 11];
        let e10: Vec<f64> = (0..11).map(|i| if i == 10 { 1.0 } else { 0.0 }).collect();
        q.apply_left(&e10, &mut ones);
        // row 10 loses exactly its birth rate
        assert!((ones.iter().sum::<f64>() + sched.birth(10)).abs() < 1e-14);
        assert!((q.max_exit_rate() - 2.95).abs() < 1e-15);
    }

    #[test]
    fn policy_levels() {
        let p = TruncationPolicy {
            initial_level: 16,
            max_level: 100,
            rel_tol: 1e-10,
            growth_factor: 2,
        };
        assert_eq!(p.levels(0).collect::<Vec<_>>(), vec![16, 32, 64, 100]);
        assert_eq!(p.levels(40).collect::<Vec<_>>(), vec![64, 100]);
        assert_eq!(p.levels(1000).collect::<Vec<_>>(), vec![100]);
        assert!(p.validate().is_ok());
        assert!(TruncationPolicy { initial_level: 4, ..p }.validate().is_err());
        assert!(TruncationPolicy { rel_tol: 1.0, ..p }.validate().is_err());
        assert!(TruncationPolicy { max_level: 16, ..p }.validate().is_err());
    }

    #[test]
    fn schedule_json_shape() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"rates": {"kind": "constant", "birth": 1.0, "death": 1.25}, "alpha": 0.4, "beta": 0.3}"#,
        )
        .unwrap();
        assert_eq!(spec.rates, RateSchedule::constant(1.0, 1.25));
        assert!(serde_json::from_str::<ModelSpec>(
            r#"{"rates": {"kind": "constant", "birth": 1.0, "death": 1.25, "x": 1}, "alpha": 0.4, "beta": 0.3}"#
        )
        .is_err());
        assert!(serde_json::from_str::<ModelSpec>(
            r#"{"rates": {"kind": "table", "birth": [1.0], "death": [1.0]}, "alpha": 0.4, "beta": 0.3, "gamma": 1}"#
        )
        .is_err());
    }
}
