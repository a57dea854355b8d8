//! Transition probabilities in the time domain.
//!
//! `p̂_{j,·}(t)` and the direct rows of the full process come from
//! uniformization of a truncated generator; the formula route builds
//! `p_{j,·}(t)` from catastrophe-free rows and two convolution integrals.

mod inversion;
mod quadrature;
mod uniformization;

pub use inversion::{invert_laplace, InversionSettings, Inverted};
pub use quadrature::{integrate, QuadratureResult, QuadratureSettings};
pub use uniformization::POISSON_CUTOFF;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CatastropheRates, RateSchedule, TruncatedGenerator, TruncationPolicy};
use crate::resolvent::PROBE_WINDOW;
use uniformization::propagate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransientMethod {
    HatUniformization,
    Formula,
    FullUniformization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientRow {
    pub start: usize,
    pub time: f64,
    /// `probabilities[n]` for `n` in `0..=truncation_level`.
    pub probabilities: Vec<f64>,
    pub method: TransientMethod,
    pub truncation_level: usize,
    /// Mass lost through the truncation boundary plus quadrature and
    /// Poisson-tail error.
    pub error_budget: f64,
}

impl TransientRow {
    /// Probability at level `n` (zero beyond the truncation).
    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    fn indicator(start: usize, time: f64, method: TransientMethod) -> Self {
        let mut probabilities = vec![0.0; start + 1];
        probabilities[start] = 1.0;
        TransientRow {
            start,
            time,
            probabilities,
            method,
            truncation_level: start,
            error_budget: 0.0,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and >= 0 (got {t})")));
    }
    Ok(())
}

fn indicator_vec(dim: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[at] = 1.0;
    v
}

struct Converged {
    level: usize,
    rows: Vec<Vec<f64>>,
    deficit: f64,
}

/// Grow the truncation until every requested row loses at most `rel_tol`
/// through the boundary at time `t`.
fn converge_transient(
    policy: &TruncationPolicy,
    starts: &[usize],
    t: f64,
    build: &dyn Fn(usize) -> TruncatedGenerator,
    what: &'static str,
) -> Result<Converged> {
    policy.validate()?;
    let floor = starts.iter().copied().max().unwrap_or(0) + PROBE_WINDOW;
    let mut deficit = f64::INFINITY;
    let mut level = 0;
    for n in policy.levels(floor) {
        let generator = build(n);
        let initial: Vec<_> = starts.iter().map(|&j| indicator_vec(n + 1, j)).collect();
        let rows = propagate(&generator, &initial, t);
        deficit = rows.iter().map(|r| 1.0 - r.iter().sum::<f64>()).fold(0.0, f64::max);
        level = n;
        if deficit <= policy.rel_tol {
            return Ok(Converged { level, rows, deficit });
        }
    }
    Err(Error::NoConvergence {
        what,
        level,
        last_change: deficit,
    })
}

/// Row `j` of `P̂(t)`.
pub fn hat_transition_row(
    schedule: &RateSchedule,
    j: usize,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<TransientRow> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(TransientRow::indicator(j, t, TransientMethod::HatUniformization));
    }
    let c = converge_transient(
        policy,
        &[j],
        t,
        &|n| TruncatedGenerator::hat(schedule, n),
        "catastrophe-free transition row",
    )?;
    Ok(TransientRow {
        start: j,
        time: t,
        probabilities: c.rows.into_iter().next().unwrap_or_default(),
        method: TransientMethod::HatUniformization,
        truncation_level: c.level,
        error_budget: c.deficit.max(0.0) + POISSON_CUTOFF,
    })
}

/// Row `j` of `P(t)` from catastrophe-free rows:
/// `e^{-γt} p̂_{j,n}(t) + ∫_0^t e^{-γu} [α p̂_{0,n}(u) + β p̂_{1,n}(u)] du`.
pub fn transition_row_formula(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    t: f64,
    policy: &TruncationPolicy,
    quad: &QuadratureSettings,
) -> Result<TransientRow> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(TransientRow::indicator(j, t, TransientMethod::Formula));
    }
    let gamma = cat.gamma();
    let mut starts = vec![j];
    if cat.has_catastrophe() {
        starts.extend([0, 1].into_iter().filter(|&k| k != j));
    }
    // the boundary loss grows with time, so the level that suffices at t
    // suffices at every quadrature node
    let c = converge_transient(
        policy,
        &starts,
        t,
        &|n| TruncatedGenerator::hat(schedule, n),
        "catastrophe-free transition rows",
    )?;
    let decay = (-gamma * t).exp();
    let mut probabilities: Vec<f64> = c.rows[0].iter().map(|p| decay * p).collect();
    let mut error_budget = c.deficit.max(0.0) + POISSON_CUTOFF;

    if cat.has_catastrophe() {
        let generator = TruncatedGenerator::hat(schedule, c.level);
        let dim = c.level + 1;
        let initial = [indicator_vec(dim, 0), indicator_vec(dim, 1)];
        let integrand = |u: f64| -> Result<Vec<f64>> {
            let rows = propagate(&generator, &initial, u);
            let w = (-gamma * u).exp();
            Ok(rows[0]
                .iter()
                .zip(&rows[1])
                .map(|(p0, p1)| w * (cat.alpha * p0 + cat.beta * p1))
                .collect())
        };
        let integral = integrate(integrand, 0.0, t, quad)?;
        probabilities
            .iter_mut()
            .zip(&integral.values)
            .for_each(|(p, i)| *p += i);
        error_budget += integral.error_estimate;
    }
    Ok(TransientRow {
        start: j,
        time: t,
        probabilities,
        method: TransientMethod::Formula,
        truncation_level: c.level,
        error_budget,
    })
}

/// Row `j` of `P(t)` by uniformization of the full catastrophe generator.
pub fn transition_row_direct(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<TransientRow> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(TransientRow::indicator(j, t, TransientMethod::FullUniformization));
    }
    let c = converge_transient(
        policy,
        &[j],
        t,
        &|n| TruncatedGenerator::full(schedule, cat, n),
        "full transition row",
    )?;
    Ok(TransientRow {
        start: j,
        time: t,
        probabilities: c.rows.into_iter().next().unwrap_or_default(),
        method: TransientMethod::FullUniformization,
        truncation_level: c.level,
        error_budget: c.deficit.max(0.0) + POISSON_CUTOFF,
    })
}
