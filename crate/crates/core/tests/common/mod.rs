//! Dense-matrix oracles built straight from the rates, independent of the
//! tridiagonal machinery in the library.
#![allow(dead_code)]

use bdcat::model::RateSchedule;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Full generator on levels `0..=n` with the birth out of `n` dropped.
pub fn generator(schedule: &RateSchedule, alpha: f64, beta: f64, n: usize) -> DMatrix<f64> {
    let dim = n + 1;
    let mut q = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let mut out = 0.0;
        if i < n {
            q[(i, i + 1)] = schedule.birth(i);
        }
        out += schedule.birth(i);
        if i > 0 {
            q[(i, i - 1)] += schedule.death(i);
            out += schedule.death(i);
            q[(i, 0)] += alpha;
            out += alpha;
        }
        if i != 1 {
            q[(i, 1.min(n))] += beta;
            out += beta;
        }
        q[(i, i)] -= out;
    }
    q
}

/// Generator of the chain absorbed at its first effective catastrophe:
/// index 0 is the α state, 1 the β state, `k + 2` level `k`.
pub fn absorbed_generator(schedule: &RateSchedule, alpha: f64, beta: f64, n: usize) -> DMatrix<f64> {
    let dim = n + 3;
    let mut q = DMatrix::zeros(dim, dim);
    for i in 0..=n {
        let r = i + 2;
        if i < n {
            q[(r, r + 1)] = schedule.birth(i);
        }
        let mut out = schedule.birth(i);
        if i > 0 {
            q[(r, r - 1)] = schedule.death(i);
            out += schedule.death(i);
            q[(r, 0)] = alpha;
            out += alpha;
        }
        if i != 1 {
            q[(r, 1)] = beta;
            out += beta;
        }
        q[(r, r)] = -out;
    }
    q
}

/// Row `j` of `(sI − Q)^{-1}`.
pub fn resolvent_row(q: &DMatrix<f64>, s: Complex64, j: usize) -> Vec<Complex64> {
    let dim = q.nrows();
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        let v = Complex64::new(-q[(c, r)], 0.0);
        if r == c {
            v + s
        } else {
            v
        }
    });
    let mut e = DVector::zeros(dim);
    e[j] = Complex64::new(1.0, 0.0);
    m.lu().solve(&e).expect("dense resolvent is singular").iter().copied().collect()
}

/// Row `j` of `exp(tQ)`.
pub fn transition_row(q: &DMatrix<f64>, t: f64, j: usize) -> Vec<f64> {
    let p = (q * t).exp();
    p.row(j).iter().copied().collect()
}

pub struct Absorption {
    pub mean: f64,
    pub second_moment: f64,
    pub p_alpha_first: f64,
    /// `∫ p̃_{j,0}(t) dt` and `∫ p̃_{j,1}(t) dt`.
    pub phi_at_zero: [f64; 2],
    /// `d/ds` of the same at `s = 0`.
    pub phi_derivative_at_zero: [f64; 2],
}

/// Absorption-time moments of the dense absorbed chain from level `j`.
pub fn absorption(schedule: &RateSchedule, alpha: f64, beta: f64, n: usize, j: usize) -> Absorption {
    let q = absorbed_generator(schedule, alpha, beta, n);
    let dim = n + 1;
    let t = DMatrix::from_fn(dim, dim, |r, c| -q[(r + 2, c + 2)]);
    let lu = t.clone().lu();
    let ones = DVector::from_element(dim, 1.0);
    let tau = lu.solve(&ones).unwrap();
    let tau2 = lu.solve(&tau).unwrap();
    let to_alpha = DVector::from_fn(dim, |r, _| q[(r + 2, 0)]);
    let p_alpha = lu.solve(&to_alpha).unwrap();
    let inv = t.try_inverse().unwrap();
    let inv2 = &inv * &inv;
    Absorption {
        mean: tau[j],
        second_moment: 2.0 * tau2[j],
        p_alpha_first: p_alpha[j],
        phi_at_zero: [inv[(j, 0)], inv[(j, 1)]],
        phi_derivative_at_zero: [-inv2[(j, 0)], -inv2[(j, 1)]],
    }
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / (b.norm() + 1e-30)
}
