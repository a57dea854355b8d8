//! The first effective catastrophe time `C_j`: transforms of its density and
//! of the two type-restricted sub-densities, type probabilities, moments and
//! the density itself by numerical inversion.
//!
//! Quantities "at 0" use the `π̂(γ)`-only closed form evaluated at `s = 0`,
//! which is regular whenever `γ > 0`. Its derivative comes from forward-mode
//! differentiation of the same expression and is confirmed by central
//! differences; an extrapolation from small positive `s` through the full
//! resolvent is kept as a consistency diagnostic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catastrophe::CatastropheRows;
use crate::error::{Error, Result};
use crate::model::{CatastropheRates, RateSchedule, TruncationPolicy};
use crate::resolvent::{hat_resolvent_rows, Frequency};
use crate::transient::{integrate, invert_laplace, InversionSettings, Inverted, QuadratureSettings};

/// Largest accepted relative disagreement between the chain-rule and
/// finite-difference derivatives at 0.
pub const DERIVATIVE_AGREEMENT: f64 = 1e-5;
/// Tail mass left beyond the density integration horizon.
pub const HORIZON_TAIL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformTriple {
    /// `Δ_{j,0}(s)`: transform of the α-first sub-density.
    pub delta_alpha: Complex64,
    /// `Δ_{j,1}(s)`: transform of the β-first sub-density.
    pub delta_beta: Complex64,
    /// `Δ_j(s)`.
    pub delta: Complex64,
}

impl TransformTriple {
    fn from_phi(cat: &CatastropheRates, s: Complex64, phi0: Complex64, phi1: Complex64) -> Self {
        let (alpha, beta, gamma) = (cat.alpha, cat.beta, cat.gamma());
        let (r0, r1) = (1.0 - s * phi0, 1.0 - s * phi1);
        let denom = s * s + gamma * s;
        TransformTriple {
            delta_alpha: (alpha * (s + beta) * r0 - alpha * beta * r1) / denom,
            delta_beta: (beta * (s + alpha) * r1 - alpha * beta * r0) / denom,
            delta: (alpha * r0 + beta * r1) / (s + gamma),
        }
    }

    /// `|Δ_{j,0} + Δ_{j,1} − Δ_j|`.
    pub fn sum_defect(&self) -> f64 {
        (self.delta_alpha + self.delta_beta - self.delta).norm()
    }
}

fn require_catastrophe(cat: &CatastropheRates) -> Result<()> {
    if cat.has_catastrophe() {
        Ok(())
    } else {
        Err(Error::RequiresCatastrophe)
    }
}

fn transform_at(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    s: Complex64,
    policy: &TruncationPolicy,
) -> Result<TransformTriple> {
    let rows = CatastropheRows::new(schedule, cat, j, s, policy, false, 0)?;
    Ok(TransformTriple::from_phi(cat, s, rows.phi(0)?, rows.phi(1)?))
}

pub fn delta_transforms(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    s: Frequency,
    policy: &TruncationPolicy,
) -> Result<TransformTriple> {
    require_catastrophe(cat)?;
    transform_at(schedule, cat, j, s.value(), policy)
}

/// `φ_{j,0}, φ_{j,1}` and their derivatives at `s = 0`, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitValues {
    pub phi: [f64; 2],
    pub derivative: [f64; 2],
    /// Central-difference derivatives on the same truncation.
    pub derivative_by_differences: [f64; 2],
    /// Values extrapolated from small positive `s` through the full resolvent.
    /// Only a diagnostic: the `1/s` terms cancel badly when `γ` is large.
    pub phi_extrapolated: [f64; 2],
    pub truncation_level: usize,
}

impl LimitValues {
    pub fn derivative_mismatch(&self) -> f64 {
        relative_mismatch(&self.derivative, &self.derivative_by_differences)
    }

    pub fn limit_mismatch(&self) -> f64 {
        relative_mismatch(&self.phi, &self.phi_extrapolated)
    }
}

/// Componentwise difference measured against the larger of the two entries
/// of `reference`.
fn relative_mismatch(reference: &[f64; 2], other: &[f64; 2]) -> f64 {
    let scale = reference[0].abs().max(reference[1].abs()).max(f64::MIN_POSITIVE);
    reference
        .iter()
        .zip(other)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

pub fn limit_values(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    policy: &TruncationPolicy,
) -> Result<LimitValues> {
    require_catastrophe(cat)?;
    let zero = Complex64::default();
    let rows = CatastropheRows::new(schedule, cat, j, zero, policy, true, 0)?;
    let (phi0, d0) = rows.phi_with_derivative(0)?;
    let (phi1, d1) = rows.phi_with_derivative(1)?;
    let level = rows.hat.truncation_level;
    let gamma = cat.gamma();

    let phi_at = |s: f64| -> Result<[f64; 2]> {
        let r = CatastropheRows::at_level(schedule, cat, j, Complex64::new(s, 0.0), level, false)?;
        Ok([r.phi(0)?.re, r.phi(1)?.re])
    };
    // φ varies on the scale |φ/φ′| (a mean time), which can be far below 1/γ
    let scale = [(phi0, d0), (phi1, d1)]
        .iter()
        .filter(|(_, d)| d.norm() > 0.0)
        .map(|(p, d)| p.norm() / d.norm())
        .fold(1.0 / gamma, f64::min);
    let h = 1e-4 * scale;
    let (plus, minus) = (phi_at(h)?, phi_at(-h)?);
    let by_differences = [(plus[0] - minus[0]) / (2.0 * h), (plus[1] - minus[1]) / (2.0 * h)];

    // second-order Richardson on a halving sequence through the 1/s layer
    let via_fg = |s: f64| -> Result<[f64; 2]> {
        let r = CatastropheRows::at_level(schedule, cat, j, Complex64::new(s, 0.0), level, false)?;
        Ok([r.phi_via_fg(0, true)?.re, r.phi_via_fg(1, true)?.re])
    };
    let base = 1e-2 * gamma;
    let f = [via_fg(base)?, via_fg(base / 2.0)?, via_fg(base / 4.0)?];
    let extrapolate = |k: usize| {
        let r1 = 2.0 * f[1][k] - f[0][k];
        let r2 = 2.0 * f[2][k] - f[1][k];
        (4.0 * r2 - r1) / 3.0
    };

    let values = LimitValues {
        phi: [phi0.re, phi1.re],
        derivative: [d0.re, d1.re],
        derivative_by_differences: by_differences,
        phi_extrapolated: [extrapolate(0), extrapolate(1)],
        truncation_level: level,
    };
    let mismatch = values.derivative_mismatch();
    if !(mismatch <= DERIVATIVE_AGREEMENT) {
        return Err(Error::LimitMismatch {
            what: "derivative of phi at 0",
            mismatch,
        });
    }
    Ok(values)
}

fn probabilities_from(cat: &CatastropheRates, phi: &[f64; 2]) -> (f64, f64) {
    let (alpha, beta, gamma) = (cat.alpha, cat.beta, cat.gamma());
    let p_alpha = alpha * (1.0 + beta * (phi[1] - phi[0])) / gamma;
    let p_beta = beta * (1.0 + alpha * (phi[0] - phi[1])) / gamma;
    (p_alpha, p_beta)
}

/// `(P(C_{j,0} < C_{j,1}), P(C_{j,1} < C_{j,0}))`.
pub fn type_probabilities(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let limits = limit_values(schedule, cat, j, policy)?;
    let (a, b) = probabilities_from(cat, &limits.phi);
    Ok((a.clamp(0.0, 1.0), b.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingleType {
    AlphaOnly,
    BetaOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentRoute {
    General,
    SingleType,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentDiagnostics {
    pub route: MomentRoute,
    pub truncation_level: usize,
    pub rel_tol: f64,
    /// Present for the general route.
    pub limits: Option<LimitValues>,
    pub derivative_mismatch: Option<f64>,
    pub limit_mismatch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstCatastropheReport {
    pub start: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub p_alpha_first: f64,
    pub p_beta_first: f64,
    pub method: MomentDiagnostics,
}

pub fn moments(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    policy: &TruncationPolicy,
) -> Result<FirstCatastropheReport> {
    let limits = limit_values(schedule, cat, j, policy)?;
    let (alpha, beta, gamma) = (cat.alpha, cat.beta, cat.gamma());
    let weighted = 1.0 + alpha * limits.phi[0] + beta * limits.phi[1];
    let weighted_derivative = alpha * limits.derivative[0] + beta * limits.derivative[1];
    let mean = weighted / gamma;
    let second_moment = 2.0 * (weighted - gamma * weighted_derivative) / (gamma * gamma);
    let (p_alpha, p_beta) = probabilities_from(cat, &limits.phi);
    Ok(FirstCatastropheReport {
        start: j,
        mean,
        second_moment,
        variance: second_moment - mean * mean,
        p_alpha_first: p_alpha.clamp(0.0, 1.0),
        p_beta_first: p_beta.clamp(0.0, 1.0),
        method: MomentDiagnostics {
            route: MomentRoute::General,
            truncation_level: limits.truncation_level,
            rel_tol: policy.rel_tol,
            derivative_mismatch: Some(limits.derivative_mismatch()),
            limit_mismatch: Some(limits.limit_mismatch()),
            limits: Some(limits),
        },
    })
}

/// Moments when only one catastrophe type is present, straight from the
/// catastrophe-free resolvent at `s = rate`.
pub fn moments_single_type(
    schedule: &RateSchedule,
    rate: f64,
    which: SingleType,
    j: usize,
    policy: &TruncationPolicy,
) -> Result<FirstCatastropheReport> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidInput(format!("catastrophe rate must be > 0 (got {rate})")));
    }
    let target = match which {
        SingleType::AlphaOnly => 0,
        SingleType::BetaOnly => 1,
    };
    let starts: Vec<usize> = if j == target { vec![j] } else { vec![target, j] };
    let rows = hat_resolvent_rows(schedule, &starts, Frequency::real(rate)?, policy, true, 0)?
        .require_converged("single-type hat resolvent rows")?;
    let value = |a, b| rows.value(a, b).re;
    let slope = |a, b| rows.derivative(a, b).re;

    let denom = 1.0 - rate * value(target, target);
    let ratio = value(j, target) / denom;
    let mean = 1.0 / rate + ratio;
    let second_moment = 2.0 / (rate * rate)
        * (1.0 + rate * ratio
            - rate * rate * slope(j, target) / denom
            - rate.powi(3) * value(j, target) * slope(target, target) / (denom * denom));
    let (p_alpha, p_beta) = match which {
        SingleType::AlphaOnly => (1.0, 0.0),
        SingleType::BetaOnly => (0.0, 1.0),
    };
    Ok(FirstCatastropheReport {
        start: j,
        mean,
        second_moment,
        variance: second_moment - mean * mean,
        p_alpha_first: p_alpha,
        p_beta_first: p_beta,
        method: MomentDiagnostics {
            route: MomentRoute::SingleType,
            truncation_level: rows.truncation_level,
            rel_tol: policy.rel_tol,
            limits: None,
            derivative_mismatch: None,
            limit_mismatch: None,
        },
    })
}

/// Settings with the contour bound defaulted to `γ`, which bounds the density
/// (the effective-catastrophe hazard never exceeds `γ`).
fn density_settings(cat: &CatastropheRates, inversion: &InversionSettings) -> InversionSettings {
    InversionSettings {
        bound: Some(inversion.bound.unwrap_or(cat.gamma())),
        ..*inversion
    }
}

/// `d_j(t)` by inversion of `Δ_j`, without any clipping.
pub fn density_raw(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    t: f64,
    policy: &TruncationPolicy,
    inversion: &InversionSettings,
) -> Result<Inverted> {
    require_catastrophe(cat)?;
    let settings = density_settings(cat, inversion);
    invert_laplace(|s| Ok(transform_at(schedule, cat, j, s, policy)?.delta), t, &settings)
}

/// `d_j(t)`. Negative values within the inversion error band are clipped to 0.
pub fn density(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    t: f64,
    policy: &TruncationPolicy,
    inversion: &InversionSettings,
) -> Result<f64> {
    let r = density_raw(schedule, cat, j, t, policy, inversion)?;
    let band = r.error_estimate + density_settings(cat, inversion).tol;
    Ok(if r.value < 0.0 && r.value >= -band { 0.0 } else { r.value })
}

/// `P(C_j ≤ t)` by quadrature of the inverted density.
pub fn cdf(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    t: f64,
    policy: &TruncationPolicy,
    inversion: &InversionSettings,
    quad: &QuadratureSettings,
) -> Result<f64> {
    require_catastrophe(cat)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and >= 0 (got {t})")));
    }
    let r = integrate(
        |u| Ok(vec![density_raw(schedule, cat, j, u, policy, inversion)?.value]),
        0.0,
        t,
        quad,
    )?;
    Ok(r.values.first().copied().unwrap_or(0.0))
}

/// Quadrature settings suited to inverted densities: the inversion noise
/// (about `1e-9`) rules out the default `1e-8` over long horizons.
pub fn density_quadrature() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-6,
        ..Default::default()
    }
}

/// Horizon `T` with `P(C_j > T) ≤ E[C_j²] / T² = HORIZON_TAIL`.
pub fn density_horizon(report: &FirstCatastropheReport) -> f64 {
    (report.second_moment / HORIZON_TAIL).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catastrophe::phi_direct;

    fn preset() -> (RateSchedule, CatastropheRates) {
        (RateSchedule::constant(1.0, 1.25), CatastropheRates::new(0.4, 0.3))
    }

    #[test]
    fn transforms_match_absorbing_states() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        let s = Frequency::real(1.0).unwrap();
        let t = delta_transforms(&sched, &cat, 0, s, &policy).unwrap();
        assert!(t.sum_defect() < 1e-12);
        let d = phi_direct(&sched, &cat, 0, s, &policy).unwrap();
        let sv = s.value();
        assert!((t.delta_alpha - sv * d.alpha_absorbed).norm() < 1e-9);
        assert!((t.delta_beta - sv * d.beta_absorbed).norm() < 1e-9);
        assert!((t.delta - sv * (d.alpha_absorbed + d.beta_absorbed)).norm() < 1e-9);
    }

    #[test]
    fn transform_near_zero_is_one() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        for j in [0, 1, 5] {
            let t = delta_transforms(&sched, &cat, j, Frequency::real(1e-6).unwrap(), &policy).unwrap();
            assert!((t.delta - 1.0).norm() < 1e-4);
        }
    }

    #[test]
    fn single_type_transforms_vanish() {
        let (sched, _) = preset();
        let policy = TruncationPolicy::default();
        let s = Frequency::new(Complex64::new(0.6, 0.9)).unwrap();
        let t = delta_transforms(&sched, &CatastropheRates::new(0.5, 0.0), 3, s, &policy).unwrap();
        assert_eq!(t.delta_beta, Complex64::default());
        assert_eq!(type_probabilities(&sched, &CatastropheRates::new(0.5, 0.0), 3, &policy).unwrap(), (1.0, 0.0));
        assert_eq!(type_probabilities(&sched, &CatastropheRates::new(0.0, 0.5), 3, &policy).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn requires_catastrophe() {
        let (sched, _) = preset();
        let policy = TruncationPolicy::default();
        assert!(matches!(
            moments(&sched, &CatastropheRates::NONE, 0, &policy),
            Err(Error::RequiresCatastrophe)
        ));
    }

    #[test]
    fn report_invariants() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        for j in [0, 1, 2, 7] {
            let r = moments(&sched, &cat, j, &policy).unwrap();
            assert!(r.mean > 0.0);
            assert!(r.variance >= 0.0);
            assert!((r.p_alpha_first + r.p_beta_first - 1.0).abs() < 1e-9);
            assert!(r.method.derivative_mismatch.unwrap() < 1e-6);
        }
    }

    #[test]
    fn single_type_matches_general() {
        let (sched, _) = preset();
        let policy = TruncationPolicy::default();
        for j in [0, 1, 5] {
            let a = moments(&sched, &CatastropheRates::new(0.7, 0.0), j, &policy).unwrap();
            let b = moments_single_type(&sched, 0.7, SingleType::AlphaOnly, j, &policy).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-8 * b.mean);
            assert!((a.second_moment - b.second_moment).abs() < 1e-8 * b.second_moment);
            assert!(b.mean > 1.0 / 0.7);
            let a = moments(&sched, &CatastropheRates::new(0.0, 0.7), j, &policy).unwrap();
            let b = moments_single_type(&sched, 0.7, SingleType::BetaOnly, j, &policy).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-8 * b.mean);
            assert!((a.second_moment - b.second_moment).abs() < 1e-8 * b.second_moment);
        }
    }

    #[test]
    fn huge_alpha_fires_at_once() {
        let (sched, _) = preset();
        let policy = TruncationPolicy::default();
        let alpha = 1e3;
        let r = moments(&sched, &CatastropheRates::new(alpha, 0.0), 4, &policy).unwrap();
        assert!(r.mean >= (1.0 - 1e-3) / alpha && r.mean < 1.01 / alpha, "{}", r.mean);
    }

    #[test]
    fn density_of_pure_alpha_from_level_one() {
        // from level 1 with β = 0 the first effective catastrophe is at rate α
        // until the chain hits 0; with a tiny birth-death activity C ≈ Exp(α)
        let sched = RateSchedule::constant(1e-9, 1e-9);
        let cat = CatastropheRates::new(0.8, 0.0);
        let policy = TruncationPolicy::default();
        let inv = InversionSettings::default();
        for t in [0.5, 2.0] {
            let d = density(&sched, &cat, 1, t, &policy, &inv).unwrap();
            assert!((d - 0.8 * (-0.8 * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn cdf_is_monotone_and_bounded() {
        let (sched, cat) = preset();
        let policy = TruncationPolicy::default();
        let inv = InversionSettings::default();
        let q = density_quadrature();
        let a = cdf(&sched, &cat, 1, 1.0, &policy, &inv, &q).unwrap();
        let b = cdf(&sched, &cat, 1, 3.0, &policy, &inv, &q).unwrap();
        assert!(0.0 < a && a < b && b < 1.0);
    }
}
