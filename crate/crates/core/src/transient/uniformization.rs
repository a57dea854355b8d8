//! Transient rows of a truncated generator by uniformization.

use crate::model::TruncatedGenerator;

/// Poisson mass below which terms are dropped.
pub const POISSON_CUTOFF: f64 = 1e-12;

/// Normalized Poisson(`mean`) weights on `first..first + weights.len()`,
/// built outward from the mode so nothing overflows for large means.
pub(crate) fn poisson_weights(mean: f64) -> (usize, Vec<f64>) {
    if mean <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = mean.floor() as usize;
    // relative to the mode weight; Gaussian-like decay makes the dropped mass
    // a small multiple of this
    let floor = POISSON_CUTOFF * 1e-3;

    let mut left = vec![1.0];
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / mean;
        if w < floor {
            break;
        }
        left.push(w);
        k -= 1;
    }
    let first = mode + 1 - left.len();
    left.reverse();

    let mut weights = left;
    let mut w = 1.0;
    let mut k = mode;
    loop {
        k += 1;
        w *= mean / k as f64;
        if w < floor {
            break;
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|x| *x /= total);
    (first, weights)
}

/// `v · exp(tQ)` for each initial row vector `v`.
pub(crate) fn propagate(generator: &TruncatedGenerator, initial: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let q = generator.max_exit_rate();
    if t == 0.0 || q == 0.0 {
        return initial.to_vec();
    }
    let (first, weights) = poisson_weights(q * t);
    let last = first + weights.len() - 1;
    let dim = generator.dim();
    let mut scratch = vec![0.0; dim];
    initial
        .iter()
        .map(|v0| {
            let mut v = v0.clone();
            let mut acc = vec![0.0; dim];
            for k in 0..=last {
                if k >= first {
                    let w = weights[k - first];
                    acc.iter_mut().zip(&v).for_each(|(a, x)| *a += w * x);
                }
                if k < last {
                    // v ← v (I + Q/q)
                    generator.apply_left(&v, &mut scratch);
                    v.iter_mut().zip(&scratch).for_each(|(x, d)| *x = (*x + d / q).max(0.0));
                }
            }
            acc
        })
        .collect()
}
