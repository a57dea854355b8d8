//! Resolvent algebra of the catastrophe process.
//!
//! Everything here is expressed through `π̂(s + γ)`, the catastrophe-free
//! resolvent at a shifted frequency:
//!
//! * the full resolvent `π_{j,n}(s) = π̂_{j,n}(s+γ) + [α π̂_{0,n}(s+γ) + β π̂_{1,n}(s+γ)] / s`;
//! * the absorbed-chain resolvent `φ_{j,n}(s)` on `S = {-2, -1, 0, 1, ...}`,
//!   by two closed forms: one through `π` with the coefficients `F_j, G_j`,
//!   one directly through `π̂` with the numerators `U_j, V_j`.
//!
//! Both resolvents also have direct tridiagonal solves that share nothing
//! with the closed forms beyond the rate schedule.
//!
//! The `π̂`-only form has no `1/s` factor, so [`CatastropheRows`] can evaluate
//! it at `s = 0` (and differentiate it there) as long as `γ > 0`.

use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CatastropheRates, RateSchedule, TruncationPolicy};
use crate::resolvent::{converge_rows, hat_resolvent_rows, hat_resolvent_rows_at_level, unit, Frequency, HatRowSet, ResolventVector, PROBE_WINDOW};

/// Real frequencies below this are rejected by the `1/s` layer.
pub const MIN_REAL_FREQUENCY: f64 = 1e-8;
/// `|H(s)|` below this is treated as a zero of `H`.
const H_FLOOR: f64 = 1e-280;

fn check_frequency(s: Frequency) -> Result<()> {
    if s.is_real() && s.value().re < MIN_REAL_FREQUENCY {
        return Err(Error::InvalidFrequency {
            re: s.value().re,
            im: 0.0,
            reason: "real frequencies below 1e-8 must use the s -> 0 limit operations",
        });
    }
    Ok(())
}

/// Scalars used by the closed forms: the evaluation path is either plain
/// complex numbers or first-order dual numbers carrying `d/ds`.
pub(crate) trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn constant(x: f64) -> Self;
}

impl Field for Complex64 {
    fn constant(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// `value + ε·derivative` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dual {
    pub value: Complex64,
    pub derivative: Complex64,
}

impl Dual {
    pub fn new(value: Complex64, derivative: Complex64) -> Self {
        Dual { value, derivative }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.value + o.value, self.derivative + o.derivative)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.value - o.value, self.derivative - o.derivative)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.value * o.value, self.derivative * o.value + self.value * o.derivative)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let v = self.value / o.value;
        Dual::new(v, (self.derivative - v * o.derivative) / o.value)
    }
}

impl Field for Dual {
    fn constant(x: f64) -> Self {
        Dual::new(Complex64::new(x, 0.0), Complex64::default())
    }
}

/// The `π̂(s+γ)` entries that one absorbed-resolvent entry depends on.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HatSample<T> {
    pub j0: T,
    pub j1: T,
    pub jn: T,
    pub p00: T,
    pub p01: T,
    pub p0n: T,
    pub p10: T,
    pub p11: T,
    pub p1n: T,
}

/// Values of the `π̂`-only closed form at one `(j, n, s)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HatClosedForm<T> {
    pub alpha_factor: T,
    pub beta_factor: T,
    pub a0: T,
    pub a1: T,
    pub h: T,
    pub u: T,
    pub v: T,
    pub phi: T,
}

pub(crate) fn hat_closed_form<T: Field>(p: &HatSample<T>, s: T, cat: &CatastropheRates) -> HatClosedForm<T> {
    let one = T::constant(1.0);
    let alpha = T::constant(cat.alpha);
    let beta = T::constant(cat.beta);
    let ab = T::constant(cat.alpha * cat.beta);
    let s_gamma = s + T::constant(cat.gamma());

    let alpha_factor = one - alpha * p.p00;
    let beta_factor = one - beta * p.p11;
    let a0 = one - alpha * p.p00 - beta * p.p10;
    let a1 = one - alpha * p.p01 - beta * p.p11;

    let h = ab * (a0 * p.p01 + a1 * p.p10 - s * p.p10 * p.p01)
        + alpha * a0 * beta_factor
        + beta * a1 * alpha_factor
        + s * alpha_factor * beta_factor;
    let u = alpha * s_gamma * beta_factor * p.j0 + ab * s_gamma * p.p10 * p.j1;
    let v = beta * s_gamma * alpha_factor * p.j1 + ab * s_gamma * p.p01 * p.j0;
    let phi = p.jn + (u * p.p0n + v * p.p1n) / h;
    HatClosedForm {
        alpha_factor,
        beta_factor,
        a0,
        a1,
        h,
        u,
        v,
        phi,
    }
}

/// `A_{ij}(s) = 1 − s π_{i,j}(s)` for the pairs used by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AMatrix {
    pub a00: Complex64,
    pub a01: Complex64,
    pub a10: Complex64,
    pub a11: Complex64,
    pub aj0: Complex64,
    pub aj1: Complex64,
}

/// Auxiliary scalars at one frequency and start level.
#[derive(Debug, Clone, PartialEq)]
pub struct CatastropheFactors {
    pub frequency: Complex64,
    pub start: usize,
    /// `a_0(s)`, `a_1(s)`.
    pub a: [Complex64; 2],
    /// `A_{ij}` from the full resolvent, `1 − s π_{i,j}(s)`.
    pub a_from_full: AMatrix,
    /// `A_{ij}` from `a_j(s) − s π̂_{i,j}(s+γ)`.
    pub a_from_hat: AMatrix,
    /// `1 − α π̂_{0,0}(s+γ)`.
    pub alpha_factor: Complex64,
    /// `1 − β π̂_{1,1}(s+γ)`.
    pub beta_factor: Complex64,
    /// `H(s)` from the `A_{ij}` determinant form.
    pub h_from_full: Complex64,
    /// `H(s)` from the `π̂`-only form.
    pub h_from_hat: Complex64,
    pub u: Complex64,
    pub v: Complex64,
    pub f: Complex64,
    pub g: Complex64,
    pub truncation_level: usize,
}

impl CatastropheFactors {
    /// `s H [F_j + (α/s)(1 + F_j + G_j)] − s U_j` and its β analogue.
    pub fn identity_residuals(&self, cat: &CatastropheRates) -> (Complex64, Complex64) {
        let s = self.frequency;
        let h = self.h_from_full;
        let total = 1.0 + self.f + self.g;
        let lhs_u = s * h * (self.f + cat.alpha / s * total);
        let lhs_v = s * h * (self.g + cat.beta / s * total);
        (lhs_u - s * self.u, lhs_v - s * self.v)
    }
}

/// Rows `π̂_{0,·}, π̂_{1,·}, π̂_{j,·}` at `s + γ`, from which every closed form
/// for start `j` is evaluated. `s` may be any complex number with
/// `Re(s + γ) > 0`, including 0.
#[derive(Debug, Clone)]
pub struct CatastropheRows {
    pub cat: CatastropheRates,
    pub start: usize,
    pub s: Complex64,
    pub hat: HatRowSet,
}

impl CatastropheRows {
    pub fn new(
        schedule: &RateSchedule,
        cat: &CatastropheRates,
        j: usize,
        s: Complex64,
        policy: &TruncationPolicy,
        with_derivatives: bool,
        min_level: usize,
    ) -> Result<Self> {
        let shifted = Frequency::new(s + cat.gamma())?;
        let starts = Self::starts(j);
        let hat = hat_resolvent_rows(schedule, &starts, shifted, policy, with_derivatives, min_level)?
            .require_converged("shifted hat resolvent rows")?;
        Ok(CatastropheRows {
            cat: *cat,
            start: j,
            s,
            hat,
        })
    }

    /// Same rows on a fixed truncation level (no refinement).
    pub fn at_level(
        schedule: &RateSchedule,
        cat: &CatastropheRates,
        j: usize,
        s: Complex64,
        level: usize,
        with_derivatives: bool,
    ) -> Result<Self> {
        let shifted = Frequency::new(s + cat.gamma())?;
        let starts = Self::starts(j);
        let hat = hat_resolvent_rows_at_level(schedule, &starts, shifted, level, with_derivatives)?;
        Ok(CatastropheRows {
            cat: *cat,
            start: j,
            s,
            hat,
        })
    }

    fn starts(j: usize) -> Vec<usize> {
        let mut starts = vec![0, 1];
        if j > 1 {
            starts.push(j);
        }
        starts
    }

    fn sample(&self, n: usize) -> HatSample<Complex64> {
        let (h, j) = (&self.hat, self.start);
        HatSample {
            j0: h.value(j, 0),
            j1: h.value(j, 1),
            jn: h.value(j, n),
            p00: h.value(0, 0),
            p01: h.value(0, 1),
            p0n: h.value(0, n),
            p10: h.value(1, 0),
            p11: h.value(1, 1),
            p1n: h.value(1, n),
        }
    }

    fn dual_sample(&self, n: usize) -> HatSample<Dual> {
        let (h, j) = (&self.hat, self.start);
        let d = |a: usize, b: usize| Dual::new(h.value(a, b), h.derivative(a, b));
        HatSample {
            j0: d(j, 0),
            j1: d(j, 1),
            jn: d(j, n),
            p00: d(0, 0),
            p01: d(0, 1),
            p0n: d(0, n),
            p10: d(1, 0),
            p11: d(1, 1),
            p1n: d(1, n),
        }
    }

    fn check_h(&self, h: Complex64) -> Result<()> {
        if h.norm() < H_FLOOR || !h.is_finite() {
            return Err(Error::SingularH {
                re: self.s.re,
                im: self.s.im,
                magnitude: h.norm(),
            });
        }
        Ok(())
    }

    /// `φ_{j,n}(s)` from the `π̂`-only closed form.
    pub fn phi(&self, n: usize) -> Result<Complex64> {
        let form = hat_closed_form(&self.sample(n), Complex64::new(self.s.re, self.s.im), &self.cat);
        self.check_h(form.h)?;
        Ok(form.phi)
    }

    /// `(φ_{j,n}(s), φ′_{j,n}(s))` by differentiating the closed form.
    pub fn phi_with_derivative(&self, n: usize) -> Result<(Complex64, Complex64)> {
        if self.hat.derivatives.is_none() {
            return Err(Error::InvalidInput("rows were built without derivatives".into()));
        }
        let s = Dual::new(self.s, Complex64::new(1.0, 0.0));
        let form = hat_closed_form(&self.dual_sample(n), s, &self.cat);
        self.check_h(form.h.value)?;
        Ok((form.phi.value, form.phi.derivative))
    }

    fn require_nonzero_s(&self) -> Result<()> {
        if self.s.norm() < MIN_REAL_FREQUENCY {
            return Err(Error::InvalidFrequency {
                re: self.s.re,
                im: self.s.im,
                reason: "the full resolvent has a pole at s = 0",
            });
        }
        Ok(())
    }

    /// `π_{k,n}(s)` for `k ∈ {0, 1, j}`.
    pub fn pi(&self, k: usize, n: usize) -> Complex64 {
        let h = &self.hat;
        h.value(k, n) + (self.cat.alpha * h.value(0, n) + self.cat.beta * h.value(1, n)) / self.s
    }

    /// `A_{k,n}(s) = 1 − s π_{k,n}(s)`.
    fn a_full(&self, k: usize, n: usize) -> Complex64 {
        1.0 - self.s * self.pi(k, n)
    }

    fn a_matrix_full(&self) -> AMatrix {
        let j = self.start;
        AMatrix {
            a00: self.a_full(0, 0),
            a01: self.a_full(0, 1),
            a10: self.a_full(1, 0),
            a11: self.a_full(1, 1),
            aj0: self.a_full(j, 0),
            aj1: self.a_full(j, 1),
        }
    }

    /// `H(s)` from the `A_{ij}` determinant.
    fn h_full(&self, a: &AMatrix) -> Complex64 {
        let (s, al, be) = (self.s, self.cat.alpha, self.cat.beta);
        ((s + al * a.a00) * (s + be * a.a11) - al * be * a.a10 * a.a01) / s
    }

    /// `(F_j, G_j)`.
    fn fg(&self, a: &AMatrix, h: Complex64) -> (Complex64, Complex64) {
        let (s, al, be) = (self.s, self.cat.alpha, self.cat.beta);
        let denom = s * h;
        let f = (al * be * a.a10 * a.aj1 - al * (s + be * a.a11) * a.aj0) / denom;
        let g = (al * be * a.a01 * a.aj0 - be * (s + al * a.a00) * a.aj1) / denom;
        (f, g)
    }

    pub fn factors(&self) -> Result<CatastropheFactors> {
        self.require_nonzero_s()?;
        let p = self.sample(0);
        let form = hat_closed_form(&p, self.s, &self.cat);
        self.check_h(form.h)?;
        let a_full = self.a_matrix_full();
        let h_full = self.h_full(&a_full);
        self.check_h(h_full)?;
        let (f, g) = self.fg(&a_full, h_full);

        let s = self.s;
        let a = [form.a0, form.a1];
        let a_from_hat = AMatrix {
            a00: a[0] - s * p.p00,
            a01: a[1] - s * p.p01,
            a10: a[0] - s * p.p10,
            a11: a[1] - s * p.p11,
            aj0: a[0] - s * p.j0,
            aj1: a[1] - s * p.j1,
        };
        Ok(CatastropheFactors {
            frequency: s,
            start: self.start,
            a,
            a_from_full: a_full,
            a_from_hat,
            alpha_factor: form.alpha_factor,
            beta_factor: form.beta_factor,
            h_from_full: h_full,
            h_from_hat: form.h,
            u: form.u,
            v: form.v,
            f,
            g,
            truncation_level: self.hat.truncation_level,
        })
    }

    /// `φ_{j,n}(s)` through `π` and `F_j, G_j`. With `dedicated` set, starts 0
    /// and 1 use their own two-term forms; otherwise the `F_j, G_j` form is
    /// used for every start.
    pub fn phi_via_fg(&self, n: usize, dedicated: bool) -> Result<Complex64> {
        self.require_nonzero_s()?;
        let a = self.a_matrix_full();
        let h = self.h_full(&a);
        self.check_h(h)?;
        let (s, al, be) = (self.s, self.cat.alpha, self.cat.beta);
        let (pi0, pi1) = (self.pi(0, n), self.pi(1, n));
        Ok(match self.start {
            0 if dedicated => ((s + be * a.a11) * pi0 - be * a.a01 * pi1) / h,
            1 if dedicated => (-al * a.a10 * pi0 + (s + al * a.a00) * pi1) / h,
            j => {
                let (f, g) = self.fg(&a, h);
                self.pi(j, n) + f * pi0 + g * pi1
            }
        })
    }
}

/// `π_{j,n}(s)` from the shifted catastrophe-free resolvent.
pub fn full_resolvent_entry(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    n: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    check_frequency(s)?;
    let rows = CatastropheRows::new(schedule, cat, j, s.value(), policy, false, n + 1)?;
    Ok(rows.pi(j, n))
}

/// Row `j` of the full resolvent by a direct solve of the forward resolvent
/// equations with constant sources `α/s` (level 0) and `β/s` (level 1).
pub fn full_resolvent_direct(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<ResolventVector> {
    check_frequency(s)?;
    let sv = s.value();
    let gamma = cat.gamma();
    let solve = converge_rows(schedule, sv, policy, j.max(PROBE_WINDOW), &|_| gamma, &|dim| {
        let mut b = unit(dim, j);
        b[0] += cat.alpha / sv;
        b[1] += cat.beta / sv;
        vec![b]
    })?;
    Ok(ResolventVector {
        start: j,
        frequency: sv,
        entries: solve.rows.into_iter().next().unwrap_or_default(),
        truncation_level: solve.level,
        converged: solve.converged,
        residual: solve.residuals[0],
    })
}

pub fn factors(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<CatastropheFactors> {
    check_frequency(s)?;
    CatastropheRows::new(schedule, cat, j, s.value(), policy, false, 0)?.factors()
}

/// `φ_{j,n}(s)` by the `π̂`-only closed form (the default route).
pub fn phi_entry(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    n: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    check_frequency(s)?;
    CatastropheRows::new(schedule, cat, j, s.value(), policy, false, n + 1)?.phi(n)
}

/// `φ_{j,n}(s)` through the full resolvent and `F_j, G_j`.
pub fn phi_via_fg(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    n: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    check_frequency(s)?;
    CatastropheRows::new(schedule, cat, j, s.value(), policy, false, n + 1)?.phi_via_fg(n, true)
}

/// A row of the absorbed-chain resolvent including the two absorbing states.
#[derive(Debug, Clone)]
pub struct AbsorbedResolventVector {
    /// `φ_{j,-2}(s)`.
    pub alpha_absorbed: Complex64,
    /// `φ_{j,-1}(s)`.
    pub beta_absorbed: Complex64,
    /// `φ_{j,n}(s)` for `n ≥ 0`.
    pub block: ResolventVector,
}

impl AbsorbedResolventVector {
    /// `s · (φ_{j,-2} + φ_{j,-1} + Σ_n φ_{j,n})`, which is 1 for an honest chain.
    pub fn total_mass(&self) -> Complex64 {
        self.block.frequency * (self.alpha_absorbed + self.beta_absorbed + self.block.sum())
    }
}

/// Row `j` of `Φ(s)` by a direct solve: the tridiagonal block on `n ≥ 0`
/// first, then the absorbing states from their forward equations.
pub fn phi_direct(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<AbsorbedResolventVector> {
    check_frequency(s)?;
    let (alpha, beta, gamma) = (cat.alpha, cat.beta, cat.gamma());
    let killing = move |i: usize| match i {
        0 => beta,
        1 => alpha,
        _ => gamma,
    };
    let solve = converge_rows(schedule, s.value(), policy, j.max(PROBE_WINDOW), &killing, &|dim| {
        vec![unit(dim, j)]
    })?;
    let block = ResolventVector {
        start: j,
        frequency: s.value(),
        entries: solve.rows.into_iter().next().unwrap_or_default(),
        truncation_level: solve.level,
        converged: solve.converged,
        residual: solve.residuals[0],
    };

    // forward equations of the absorbing states: s φ_{j,-2} = α Σ_{n≥1} φ_{j,n},
    // s φ_{j,-1} = β Σ_{n≠1} φ_{j,n}
    let sv = s.value();
    let total = block.sum();
    let alpha_absorbed = alpha * (total - block.entry(0)) / sv;
    let beta_absorbed = beta * (total - block.entry(1)) / sv;
    Ok(AbsorbedResolventVector {
        alpha_absorbed,
        beta_absorbed,
        block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::hat_resolvent_row;

    fn preset() -> (RateSchedule, CatastropheRates) {
        (RateSchedule::constant(1.0, 1.25), CatastropheRates::new(0.4, 0.3))
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / (b.norm() + 1e-30)
    }

    #[test]
    fn dual_arithmetic() {
        // f(x) = (x^2 + 1) / x at x = 2: f = 2.5, f' = 1 - 1/x^2 = 0.75
        let x = Dual::new(Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0));
        let f = (x * x + Dual::constant(1.0)) / x;
        assert!((f.value.re - 2.5).abs() < 1e-15);
        assert!((f.derivative.re - 0.75).abs() < 1e-15);
        let g = x - Dual::constant(3.0);
        assert_eq!(g.derivative, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn catastrophe_free_reductions() {
        let (sched, _) = preset();
        let none = CatastropheRates::NONE;
        let policy = TruncationPolicy::default();
        let s = Frequency::new(Complex64::new(0.8, 0.4)).unwrap();
        let hat = hat_resolvent_row(&sched, 3, s, &policy).unwrap();
        for n in [0, 1, 3, 6] {
            let full = full_resolvent_entry(&sched, &none, 3, n, s, &policy).unwrap();
            assert!(rel(full, hat.entry(n)) < 1e-9);
            let phi = phi_entry(&sched, &none, 3, n, s, &policy).unwrap();
            assert!(rel(phi, hat.entry(n)) < 1e-9);
        }
        let direct = full_resolvent_direct(&sched, &none, 3, s, &policy).unwrap();
        for n in 0..10 {
            assert!(rel(direct.entry(n), hat.entry(n)) < 1e-9);
        }
        let fg0 = phi_via_fg(&sched, &none, 0, 2, s, &policy).unwrap();
        let hat0 = crate::resolvent::hat_resolvent_entry(&sched, 0, 2, s, &policy).unwrap();
        assert!(rel(fg0, hat0) < 1e-9);

        let f = factors(&sched, &none, 3, s, &policy).unwrap();
        assert!(rel(f.a[0], Complex64::new(1.0, 0.0)) < 1e-15);
        assert!(rel(f.alpha_factor, Complex64::new(1.0, 0.0)) < 1e-15);
        assert!(rel(f.beta_factor, Complex64::new(1.0, 0.0)) < 1e-15);
        assert!(rel(f.h_from_full, s.value()) < 1e-12);
        assert!(rel(f.h_from_hat, s.value()) < 1e-12);
        assert_eq!(f.u, Complex64::default());
        assert_eq!(f.v, Complex64::default());
        assert_eq!(f.f, Complex64::default());
        assert_eq!(f.g, Complex64::default());
    }

    #[test]
    fn h_dual_forms_and_identities() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        for s in [Complex64::new(0.5, 0.0), Complex64::new(1.0, 2.0), Complex64::new(3.0, -0.5)] {
            let s = Frequency::new(s).unwrap();
            for j in [0, 1, 2, 5] {
                let f = factors(&sched, &cat, j, s, &policy).unwrap();
                assert!(rel(f.h_from_hat, f.h_from_full) < 1e-10);
                let pairs = [
                    (f.a_from_full.a00, f.a_from_hat.a00),
                    (f.a_from_full.a01, f.a_from_hat.a01),
                    (f.a_from_full.a10, f.a_from_hat.a10),
                    (f.a_from_full.a11, f.a_from_hat.a11),
                    (f.a_from_full.aj0, f.a_from_hat.aj0),
                    (f.a_from_full.aj1, f.a_from_hat.aj1),
                ];
                for (x, y) in pairs {
                    assert!(rel(x, y) < 1e-10);
                }
                let (ru, rv) = f.identity_residuals(&cat);
                let sv = s.value();
                assert!(ru.norm() / (sv * f.u).norm() < 1e-9);
                assert!(rv.norm() / (sv * f.v).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn a_in_unit_interval_for_real_frequency() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        for s in [0.1, 1.0, 4.0] {
            let f = factors(&sched, &cat, 4, Frequency::real(s).unwrap(), &policy).unwrap();
            for a in [f.a_from_full.a00, f.a_from_full.a01, f.a_from_full.aj0, f.a_from_full.aj1] {
                assert!(a.re >= 0.0 && a.re <= 1.0);
            }
        }
    }

    #[test]
    fn three_routes_to_phi() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        let s = Frequency::new(Complex64::new(0.7, 1.3)).unwrap();
        for j in [0, 1, 2, 6] {
            let direct = phi_direct(&sched, &cat, j, s, &policy).unwrap();
            assert!((direct.total_mass() - 1.0).norm() < 1e-8);
            for n in 0..8 {
                let a = phi_entry(&sched, &cat, j, n, s, &policy).unwrap();
                let b = phi_via_fg(&sched, &cat, j, n, s, &policy).unwrap();
                assert!(rel(a, b) < 1e-9, "j={j} n={n}");
                assert!(rel(a, direct.block.entry(n)) < 1e-9, "j={j} n={n}");
            }
        }
    }

    #[test]
    fn general_fg_form_covers_low_starts() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        for j in [0, 1] {
            let rows = CatastropheRows::new(&sched, &cat, j, Complex64::new(1.5, 0.0), &policy, false, 0).unwrap();
            for n in 0..6 {
                let dedicated = rows.phi_via_fg(n, true).unwrap();
                let general = rows.phi_via_fg(n, false).unwrap();
                assert!(rel(general, dedicated) < 1e-10);
            }
        }
    }

    #[test]
    fn alpha_free_chain_never_reaches_minus_two() {
        let (sched, _) = preset();
        let cat = CatastropheRates::new(0.0, 0.6);
        let policy = TruncationPolicy::default();
        let v = phi_direct(&sched, &cat, 3, Frequency::real(0.9).unwrap(), &policy).unwrap();
        assert_eq!(v.alpha_absorbed, Complex64::default());
        assert!((v.total_mass() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn tiny_real_frequency_is_rejected() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        let s = Frequency::real(1e-9).unwrap();
        assert!(matches!(
            full_resolvent_entry(&sched, &cat, 0, 0, s, &policy),
            Err(Error::InvalidFrequency { .. })
        ));
        let rows = CatastropheRows::new(&sched, &cat, 0, Complex64::default(), &policy, false, 0).unwrap();
        assert!(rows.phi(0).is_ok());
        assert!(rows.factors().is_err());
    }
}
