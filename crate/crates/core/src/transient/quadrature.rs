//! Adaptive Gauss–Legendre panels for vector-valued integrands.

use std::collections::HashMap;
use std::sync::Mutex;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    /// Absolute tolerance on the whole interval (sup-norm over components).
    pub abs_tol: f64,
    /// Gauss–Legendre order per panel.
    pub order: usize,
    pub max_panels: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            abs_tol: 1e-8,
            order: 16,
            max_panels: 4096,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidInput(format!("quadrature abs_tol must be > 0 (got {})", self.abs_tol)));
        }
        if self.order < 2 {
            return Err(Error::InvalidInput(format!("quadrature order must be >= 2 (got {})", self.order)));
        }
        if self.max_panels == 0 {
            return Err(Error::InvalidInput("quadrature max_panels must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    pub values: Vec<f64>,
    pub error_estimate: f64,
    pub panels: usize,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    estimate: Vec<f64>,
}

/// Nodes evaluated so far, keyed by the bit pattern of the abscissa.
struct NodeMemo<'f, F> {
    f: &'f F,
    cache: Mutex<HashMap<u64, Vec<f64>>>,
}

impl<F> NodeMemo<'_, F>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    fn eval_all(&self, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let missing: Vec<f64> = {
            let cache = self.cache.lock().expect("node memo poisoned");
            xs.iter().copied().filter(|x| !cache.contains_key(&x.to_bits())).collect()
        };
        let fresh: Vec<(f64, Vec<f64>)> = missing
            .par_iter()
            .map(|&x| (self.f)(x).map(|v| (x, v)))
            .collect::<Result<_>>()?;
        let mut cache = self.cache.lock().expect("node memo poisoned");
        cache.extend(fresh.into_iter().map(|(x, v)| (x.to_bits(), v)));
        Ok(xs.iter().map(|x| cache[&x.to_bits()].clone()).collect())
    }

    fn len(&self) -> usize {
        self.cache.lock().expect("node memo poisoned").len()
    }
}

fn panel_estimate<F>(rule: &[(f64, f64)], memo: &NodeMemo<'_, F>, a: f64, b: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let xs: Vec<f64> = rule.iter().map(|&(x, _)| mid + half * x).collect();
    let values = memo.eval_all(&xs)?;
    let mut acc = vec![0.0; values.first().map_or(0, Vec::len)];
    for (v, &(_, w)) in values.iter().zip(rule) {
        for (s, x) in acc.iter_mut().zip(v) {
            *s += half * w * x;
        }
    }
    Ok(acc)
}

fn sup_diff(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(b).zip(c).map(|((x, y), z)| (x - y - z).abs()).fold(0.0, f64::max)
}

/// `∫_a^b f(u) du` componentwise. A panel is accepted when its estimate and
/// the sum over its two halves agree to within its share of `abs_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, settings: &QuadratureSettings) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    settings.validate()?;
    if !(a.is_finite() && b.is_finite() && b >= a) {
        return Err(Error::InvalidInput(format!("invalid integration interval [{a}, {b}]")));
    }
    let memo = NodeMemo {
        f: &f,
        cache: Mutex::new(HashMap::new()),
    };
    if a == b {
        let dim = f(a)?.len();
        return Ok(QuadratureResult {
            values: vec![0.0; dim],
            error_estimate: 0.0,
            panels: 0,
            evaluations: 1,
        });
    }
    let rule = GaussLegendre::new(settings.order)
        .map_err(|e| Error::InvalidInput(format!("gauss-legendre rule: {e}")))?;
    let rule = rule.as_node_weight_pairs().to_vec();

    let width = b - a;
    let mut total: Option<Vec<f64>> = None;
    let mut error = 0.0;
    let mut accepted = 0;
    let mut stack = vec![Panel {
        a,
        b,
        estimate: panel_estimate(&rule, &memo, a, b)?,
    }];
    while let Some(panel) = stack.pop() {
        let mid = 0.5 * (panel.a + panel.b);
        let left = panel_estimate(&rule, &memo, panel.a, mid)?;
        let right = panel_estimate(&rule, &memo, mid, panel.b)?;
        let err = sup_diff(&panel.estimate, &left, &right);
        if err <= settings.abs_tol * (panel.b - panel.a) / width {
            let sum = total.get_or_insert_with(|| vec![0.0; left.len()]);
            for ((s, l), r) in sum.iter_mut().zip(&left).zip(&right) {
                *s += l + r;
            }
            error += err;
            accepted += 1;
            continue;
        }
        if accepted + stack.len() + 2 > settings.max_panels {
            return Err(Error::Quadrature {
                panels: settings.max_panels,
                estimate: error + err,
            });
        }
        stack.push(Panel {
            a: mid,
            b: panel.b,
            estimate: right,
        });
        stack.push(Panel {
            a: panel.a,
            b: mid,
            estimate: left,
        });
    }
    Ok(QuadratureResult {
        values: total.unwrap_or_default(),
        error_estimate: error,
        panels: accepted,
        evaluations: memo.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let s = QuadratureSettings::default();
        let r = integrate(|x| Ok(vec![x * x, (-x).exp()]), 0.0, 3.0, &s).unwrap();
        assert!((r.values[0] - 9.0).abs() < 1e-12);
        assert!((r.values[1] - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn sharp_peak_needs_refinement() {
        let s = QuadratureSettings::default();
        let r = integrate(|x| Ok(vec![1.0 / (1e-4 + (x - 0.3).powi(2))]), 0.0, 1.0, &s).unwrap();
        let exact = 100.0 * ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan());
        assert!((r.values[0] - exact).abs() < 1e-6 * exact);
        assert!(r.panels > 4);
    }

    #[test]
    fn panel_budget_is_enforced() {
        let s = QuadratureSettings {
            max_panels: 3,
            ..Default::default()
        };
        let r = integrate(|x| Ok(vec![(50.0 * x).sin().abs()]), 0.0, 10.0, &s);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn integrand_errors_propagate() {
        let s = QuadratureSettings::default();
        let r = integrate(|_| Err(Error::InvalidInput("boom".into())), 0.0, 1.0, &s);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
