//! Rows of the catastrophe-free resolvent `Π̂(s) = (sI − Q̂)^{-1}`.
//!
//! A row `π̂_{j,·}(s)` solves the forward resolvent equations, which are the
//! transposed system `(sI − Q̂_N)ᵀ x = e_j` on the killed truncation `Q̂_N`.
//! The truncation level grows geometrically until the entries on a fixed
//! probe window (and the row sum) stop moving.
//!
//! Derivatives come from the resolvent identity `Π̂′(s) = −Π̂(s)²`: the row
//! of `Π̂′` is `−xᵀ Π̂`, i.e. minus the solution of a second transposed
//! solve with the row itself as right-hand side.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{Tridiagonal, TridiagonalFactor};
use crate::model::{RateSchedule, TruncationPolicy};

/// Smallest probe window used by the convergence test.
pub const PROBE_WINDOW: usize = 16;

/// A resolvent argument with strictly positive real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency(Complex64);

impl Frequency {
    pub fn new(value: Complex64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidFrequency {
                re: value.re,
                im: value.im,
                reason: "not finite",
            });
        }
        if !(value.re > 0.0) {
            return Err(Error::InvalidFrequency {
                re: value.re,
                im: value.im,
                reason: "real part must be > 0",
            });
        }
        Ok(Frequency(value))
    }

    pub fn real(value: f64) -> Result<Self> {
        Self::new(Complex64::new(value, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.im == 0.0
    }

    /// `s + shift` for a nonnegative real shift.
    pub fn shifted(self, shift: f64) -> Frequency {
        debug_assert!(shift >= 0.0);
        Frequency(self.0 + shift)
    }
}

/// One row of a resolvent on levels `0..=N`.
#[derive(Debug, Clone)]
pub struct ResolventVector {
    pub start: usize,
    pub frequency: Complex64,
    pub entries: Vec<Complex64>,
    pub truncation_level: usize,
    pub converged: bool,
    /// Relative residual of the forward resolvent equations at `N`.
    pub residual: f64,
}

impl ResolventVector {
    /// Entry `n`; levels beyond the truncation are zero.
    pub fn entry(&self, n: usize) -> Complex64 {
        self.entries.get(n).copied().unwrap_or_default()
    }

    pub fn sum(&self) -> Complex64 {
        self.entries.iter().sum()
    }

    pub fn require_converged(self, what: &'static str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what,
                level: self.truncation_level,
                last_change: f64::NAN,
            })
        }
    }
}

/// Forward resolvent matrix `(sI − Q_N)ᵀ` for a birth-death generator with an
/// additional per-level killing rate `extra(i)` on the diagonal.
pub(crate) fn forward_system(
    schedule: &RateSchedule,
    s: Complex64,
    truncation: usize,
    extra: &dyn Fn(usize) -> f64,
) -> Tridiagonal {
    let dim = truncation + 1;
    let diag = (0..dim).map(|i| s + schedule.omega(i) + extra(i)).collect();
    let lower = (0..truncation).map(|i| Complex64::new(-schedule.birth(i), 0.0)).collect();
    let upper = (0..truncation).map(|i| Complex64::new(-schedule.death(i + 1), 0.0)).collect();
    Tridiagonal { lower, diag, upper }
}

pub(crate) fn unit(dim: usize, at: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::default(); dim];
    if at < dim {
        v[at] = Complex64::new(1.0, 0.0);
    }
    v
}

/// Rows solved on one truncation level, together with the factorization so
/// callers can reuse it.
pub(crate) struct RowSolve {
    pub rows: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub level: usize,
    pub converged: bool,
    pub last_change: f64,
    pub factor: TridiagonalFactor,
}

/// Largest relative change between two solves on `[0, window]` and in the
/// row sums.
fn max_change(old: &[Vec<Complex64>], new: &[Vec<Complex64>], window: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in old.iter().zip(new) {
        let w = window.min(a.len() - 1);
        let scale = b[..=w].iter().map(|z| z.norm()).fold(0.0, f64::max);
        // near-zero entries of complex-frequency rows are measured on the row scale
        let floor = 1e-12 * scale + f64::MIN_POSITIVE;
        for n in 0..=w {
            let d = (b[n] - a[n]).norm() / b[n].norm().max(floor);
            worst = worst.max(d);
        }
        let (sa, sb): (Complex64, Complex64) = (a.iter().sum(), b.iter().sum());
        worst = worst.max((sb - sa).norm() / sb.norm().max(floor));
    }
    worst
}

/// Solve the forward system for several right-hand sides, growing the
/// truncation until the rows stabilize.
pub(crate) fn converge_rows(
    schedule: &RateSchedule,
    s: Complex64,
    policy: &TruncationPolicy,
    window: usize,
    extra: &dyn Fn(usize) -> f64,
    rhs: &dyn Fn(usize) -> Vec<Vec<Complex64>>,
) -> Result<RowSolve> {
    policy.validate()?;
    let floor = 2 * (window + 1);
    let mut previous: Option<Vec<Vec<Complex64>>> = None;
    let mut last = None;
    let mut last_change = f64::INFINITY;
    for level in policy.levels(floor) {
        let system = forward_system(schedule, s, level, extra);
        let factor = system.factor()?;
        let rhs_list = rhs(level + 1);
        let rows: Vec<_> = rhs_list.iter().map(|b| factor.solve(b)).collect();
        let residuals = rows
            .iter()
            .zip(&rhs_list)
            .map(|(x, b)| system.relative_residual(x, b))
            .collect();
        let converged = match &previous {
            Some(prev) => {
                last_change = max_change(prev, &rows, window.min(level));
                last_change < policy.rel_tol
            }
            None => false,
        };
        let solve = RowSolve {
            rows: rows.clone(),
            residuals,
            level,
            converged,
            last_change,
            factor,
        };
        if converged {
            return Ok(solve);
        }
        previous = Some(rows);
        last = Some(solve);
    }
    last.ok_or_else(|| Error::InvalidInput("truncation policy yields no levels".into()))
}

fn no_extra(_: usize) -> f64 {
    0.0
}

fn window_for(starts: &[usize]) -> usize {
    starts.iter().copied().max().unwrap_or(0).max(PROBE_WINDOW)
}

/// Rows `π̂_{j,·}(s)` for several starts on a common truncation level, with
/// optional derivative rows `π̂′_{j,·}(s)`.
#[derive(Debug, Clone)]
pub struct HatRowSet {
    pub frequency: Complex64,
    pub starts: Vec<usize>,
    pub rows: Vec<Vec<Complex64>>,
    pub derivatives: Option<Vec<Vec<Complex64>>>,
    pub truncation_level: usize,
    pub converged: bool,
    pub last_change: f64,
}

impl HatRowSet {
    fn index(&self, j: usize) -> usize {
        self.starts
            .iter()
            .position(|&k| k == j)
            .unwrap_or_else(|| panic!("start {j} was not requested"))
    }

    /// `π̂_{j,n}(s)`; zero beyond the truncation.
    pub fn value(&self, j: usize, n: usize) -> Complex64 {
        self.rows[self.index(j)].get(n).copied().unwrap_or_default()
    }

    /// `π̂′_{j,n}(s)`.
    pub fn derivative(&self, j: usize, n: usize) -> Complex64 {
        let d = self.derivatives.as_ref().expect("derivatives were not requested");
        d[self.index(j)].get(n).copied().unwrap_or_default()
    }

    pub fn require_converged(self, what: &'static str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what,
                level: self.truncation_level,
                last_change: self.last_change,
            })
        }
    }
}

fn derivative_rows(factor: &TridiagonalFactor, rows: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    rows.iter()
        .map(|x| factor.solve(x).into_iter().map(|z| -z).collect())
        .collect()
}

/// Several rows of `Π̂(s)` sharing one converged truncation level. `min_level`
/// forces the truncation to exceed a level of interest.
pub fn hat_resolvent_rows(
    schedule: &RateSchedule,
    starts: &[usize],
    s: Frequency,
    policy: &TruncationPolicy,
    with_derivatives: bool,
    min_level: usize,
) -> Result<HatRowSet> {
    let window = window_for(starts).max(min_level / 2);
    let solve = converge_rows(schedule, s.value(), policy, window, &no_extra, &|dim| {
        starts.iter().map(|&j| unit(dim, j)).collect()
    })?;
    let derivatives = with_derivatives.then(|| derivative_rows(&solve.factor, &solve.rows));
    Ok(HatRowSet {
        frequency: s.value(),
        starts: starts.to_vec(),
        rows: solve.rows,
        derivatives,
        truncation_level: solve.level,
        converged: solve.converged,
        last_change: solve.last_change,
    })
}

/// Like [`hat_resolvent_rows`] but on a fixed truncation level.
pub fn hat_resolvent_rows_at_level(
    schedule: &RateSchedule,
    starts: &[usize],
    s: Frequency,
    level: usize,
    with_derivatives: bool,
) -> Result<HatRowSet> {
    if let Some(&j) = starts.iter().find(|&&j| j > level) {
        return Err(Error::InvalidInput(format!("start {j} lies beyond truncation level {level}")));
    }
    let system = forward_system(schedule, s.value(), level, &no_extra);
    let factor = system.factor()?;
    let rows: Vec<_> = starts.iter().map(|&j| factor.solve(&unit(level + 1, j))).collect();
    let derivatives = with_derivatives.then(|| derivative_rows(&factor, &rows));
    Ok(HatRowSet {
        frequency: s.value(),
        starts: starts.to_vec(),
        rows,
        derivatives,
        truncation_level: level,
        converged: true,
        last_change: 0.0,
    })
}

/// Row `j` of `Π̂(s)`. Non-convergence is reported through `converged`.
pub fn hat_resolvent_row(
    schedule: &RateSchedule,
    j: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<ResolventVector> {
    let solve = converge_rows(schedule, s.value(), policy, window_for(&[j]), &no_extra, &|dim| {
        vec![unit(dim, j)]
    })?;
    Ok(ResolventVector {
        start: j,
        frequency: s.value(),
        entries: solve.rows.into_iter().next().unwrap_or_default(),
        truncation_level: solve.level,
        converged: solve.converged,
        residual: solve.residuals[0],
    })
}

/// Row `j` of `(sI − Q̂_N)^{-1}` at a fixed truncation level `N`.
pub fn hat_resolvent_row_at_level(
    schedule: &RateSchedule,
    j: usize,
    s: Frequency,
    level: usize,
) -> Result<ResolventVector> {
    if j > level {
        return Err(Error::InvalidInput(format!("start {j} lies beyond truncation level {level}")));
    }
    let system = forward_system(schedule, s.value(), level, &no_extra);
    let rhs = unit(level + 1, j);
    let x = system.factor()?.solve(&rhs);
    Ok(ResolventVector {
        start: j,
        frequency: s.value(),
        residual: system.relative_residual(&x, &rhs),
        entries: x,
        truncation_level: level,
        converged: true,
    })
}

/// `π̂_{j,n}(s)`.
pub fn hat_resolvent_entry(
    schedule: &RateSchedule,
    j: usize,
    n: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let set = hat_resolvent_rows(schedule, &[j], s, policy, false, n + 1)?;
    let set = set.require_converged("hat resolvent entry")?;
    Ok(set.value(j, n))
}

/// `π̂′_{j,n}(s) = −Σ_k π̂_{j,k}(s) π̂_{k,n}(s)`.
pub fn hat_resolvent_derivative(
    schedule: &RateSchedule,
    j: usize,
    n: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let set = hat_resolvent_rows(schedule, &[j], s, policy, true, n + 1)?;
    let set = set.require_converged("hat resolvent derivative")?;
    Ok(set.derivative(j, n))
}
