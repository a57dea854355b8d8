//! Numerical Laplace inversion by Euler summation of the Bromwich integral
//! (Abate–Whitt).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSettings {
    /// Terms of the alternating series summed before averaging.
    pub leading_terms: usize,
    /// Binomial (Euler) averaging terms.
    pub euler_terms: usize,
    /// Target discretization error.
    pub tol: f64,
    /// Upper bound on `|f(t)|`; together with `tol` it sets the contour.
    /// Callers pick a default when unset (1 for [`invert_laplace`]).
    pub bound: Option<f64>,
    /// Error estimates above this fail the inversion.
    pub max_error: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            leading_terms: 15,
            euler_terms: 21,
            tol: 1e-8,
            bound: None,
            max_error: 1e-6,
        }
    }
}

impl InversionSettings {
    pub fn with_bound(self, bound: f64) -> Self {
        InversionSettings {
            bound: Some(bound),
            ..self
        }
    }

    /// `A` in the contour abscissa `A / 2t`; the discretization error is
    /// roughly `bound · e^{-A}`.
    pub fn contour_parameter(&self) -> f64 {
        (10.0 * self.bound.unwrap_or(1.0) / self.tol).ln().max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.euler_terms == 0 || self.leading_terms == 0 {
            return Err(Error::InvalidInput("inversion term counts must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidInput(format!("inversion tol must be in (0, 1) (got {})", self.tol)));
        }
        if let Some(b) = self.bound {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidInput(format!("inversion bound must be > 0 (got {b})")));
            }
        }
        if !(self.max_error > 0.0) {
            return Err(Error::InvalidInput(format!("inversion max_error must be > 0 (got {})", self.max_error)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub value: f64,
    /// Difference between the last two Euler averages.
    pub error_estimate: f64,
}

fn binomial_weights(m: usize) -> Vec<f64> {
    let mut w = vec![1.0; m + 1];
    for k in 1..=m {
        w[k] = w[k - 1] * (m + 1 - k) as f64 / k as f64;
    }
    let scale = 2f64.powi(-(m as i32));
    w.iter_mut().for_each(|x| *x *= scale);
    w
}

/// `f(t)` from its transform `F(s)`.
pub fn invert_laplace<F>(transform: F, t: f64, settings: &InversionSettings) -> Result<Inverted>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    settings.validate()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("inversion time must be > 0 (got {t})")));
    }
    let a = settings.contour_parameter();
    let (n, m) = (settings.leading_terms, settings.euler_terms);
    let scale = (a / 2.0).exp() / t;

    // partial[k]: alternating series summed through term k
    let mut partial = Vec::with_capacity(n + m + 2);
    let mut sum = 0.5 * transform(Complex64::new(a / (2.0 * t), 0.0))?.re;
    partial.push(sum);
    for k in 1..=(n + m + 1) {
        let term = transform(Complex64::new(a, 2.0 * k as f64 * PI) / (2.0 * t))?.re;
        sum += if k % 2 == 0 { term } else { -term };
        partial.push(sum);
    }

    let weights = binomial_weights(m);
    let average = |offset: usize| -> f64 {
        weights.iter().enumerate().map(|(k, w)| w * partial[n + offset + k]).sum::<f64>() * scale
    };
    let value = average(0);
    let next = average(1);
    let error_estimate = (value - next).abs();
    if !value.is_finite() || error_estimate > settings.max_error {
        return Err(Error::Inversion {
            t,
            estimate: error_estimate,
        });
    }
    Ok(Inverted { value, error_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function() {
        let r = invert_laplace(|s| Ok(1.0 / s), 1.0, &InversionSettings::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn exponential_pair() {
        let r = invert_laplace(|s| Ok(1.0 / (s + 0.7)), 2.0, &InversionSettings::default()).unwrap();
        assert!((r.value - (-1.4f64).exp()).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn sine_and_ramp() {
        let set = InversionSettings::default();
        for t in [0.3, 1.7, 4.0] {
            let r = invert_laplace(|s| Ok(1.0 / (s * s + 1.0)), t, &set).unwrap();
            assert!((r.value - t.sin()).abs() < 1e-7);
            let r = invert_laplace(|s| Ok(1.0 / (s * s)), t, &set.with_bound(t)).unwrap();
            assert!((r.value - t).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_time() {
        assert!(invert_laplace(|s| Ok(1.0 / s), 0.0, &InversionSettings::default()).is_err());
    }

    #[test]
    fn oscillation_is_reported() {
        // a jump at t = 1 makes the series converge badly right at the jump
        let set = InversionSettings {
            max_error: 1e-12,
            ..Default::default()
        };
        let r = invert_laplace(|s| Ok((-s).exp() / s), 1.0, &set);
        assert!(matches!(r, Err(Error::Inversion { .. })));
    }
}
