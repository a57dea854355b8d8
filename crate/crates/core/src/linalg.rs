//! Complex tridiagonal systems.
//!
//! The Thomas recurrence handles the diagonally dominant systems produced by
//! resolvent equations in the right half-plane. If elimination cancels a
//! pivot badly, the factorization is redone with row interchanges (the
//! banded LU used by LAPACK `?gttrf`), which fills one extra superdiagonal.

use num_complex::Complex64;

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;
/// Relative cancellation in a Thomas pivot that triggers the pivoted path.
const CANCELLATION: f64 = 1e-8;

/// Square tridiagonal matrix. `lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidInput("tridiagonal system must have dimension >= 1".into()));
        }
        if lower.len() != n - 1 || upper.len() != n - 1 {
            return Err(Error::InvalidInput(format!(
                "off-diagonals must have length {} (got lower {}, upper {})",
                n - 1,
                lower.len(),
                upper.len()
            )));
        }
        Ok(Tridiagonal { lower, diag, upper })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `‖Ax − b‖_∞ / ‖b‖_∞` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[Complex64], rhs: &[Complex64]) -> f64 {
        let ax = self.mul_vec(x);
        let num = ax.iter().zip(rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let den = rhs.iter().map(|b| b.norm()).fold(0.0, f64::max);
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }

    pub fn factor(&self) -> Result<TridiagonalFactor> {
        match self.thomas() {
            Some(f) => Ok(f),
            None => self.pivoted(),
        }
    }

    fn thomas(&self) -> Option<TridiagonalFactor> {
        let n = self.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut ratios = Vec::with_capacity(n.saturating_sub(1));
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                let coupling: Complex64 = self.lower[i - 1] * ratios[i - 1];
                pivot = self.diag[i] - coupling;
                let scale = self.diag[i].norm() + coupling.norm();
                if pivot.norm() <= CANCELLATION * scale {
                    return None;
                }
            }
            if !(pivot.norm() > PIVOT_FLOOR) || !pivot.is_finite() {
                return None;
            }
            pivots.push(pivot);
            if i + 1 < n {
                ratios.push(self.upper[i] / pivot);
            }
        }
        Some(TridiagonalFactor::Thomas {
            lower: self.lower.clone(),
            pivots,
            ratios,
        })
    }

    fn pivoted(&self) -> Result<TridiagonalFactor> {
        let n = self.dim();
        let mut dl = self.lower.clone();
        let mut d = self.diag.clone();
        let mut du = self.upper.clone();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() < PIVOT_FLOOR {
                    return Err(Error::Singular { row: i, pivot: d[i].norm() });
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|p| !(p.norm() >= PIVOT_FLOOR) || !p.is_finite()) {
            return Err(Error::Singular { row: i, pivot: d[i].norm() });
        }
        Ok(TridiagonalFactor::Pivoted { dl, d, du, du2, swapped })
    }
}

#[derive(Debug, Clone)]
pub enum TridiagonalFactor {
    Thomas {
        lower: Vec<Complex64>,
        pivots: Vec<Complex64>,
        ratios: Vec<Complex64>,
    },
    Pivoted {
        dl: Vec<Complex64>,
        d: Vec<Complex64>,
        du: Vec<Complex64>,
        du2: Vec<Complex64>,
        swapped: Vec<bool>,
    },
}

impl TridiagonalFactor {
    pub fn is_pivoted(&self) -> bool {
        matches!(self, TridiagonalFactor::Pivoted { .. })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut b = rhs.to_vec();
        self.solve_in_place(&mut b);
        b
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        match self {
            TridiagonalFactor::Thomas { lower, pivots, ratios } => {
                let n = pivots.len();
                b[0] /= pivots[0];
                for i in 1..n {
                    b[i] = (b[i] - lower[i - 1] * b[i - 1]) / pivots[i];
                }
                for i in (0..n - 1).rev() {
                    let next = b[i + 1];
                    b[i] -= ratios[i] * next;
                }
            }
            TridiagonalFactor::Pivoted { dl, d, du, du2, swapped } => {
                let n = d.len();
                for i in 0..n - 1 {
                    if swapped[i] {
                        let temp = b[i] - dl[i] * b[i + 1];
                        b[i] = b[i + 1];
                        b[i + 1] = temp;
                    } else {
                        let bi = b[i];
                        b[i + 1] -= dl[i] * bi;
                    }
                }
                b[n - 1] /= d[n - 1];
                if n > 1 {
                    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
                }
                for i in (0..n.saturating_sub(2)).rev() {
                    b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
                }
            }
        }
    }
}

/// Solve `A x = rhs` for tridiagonal `A`.
pub fn solve_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let system = Tridiagonal::new(lower.to_vec(), diag.to_vec(), upper.to_vec())?;
    if rhs.len() != system.dim() {
        return Err(Error::InvalidInput(format!(
            "rhs has length {} but the system has dimension {}",
            rhs.len(),
            system.dim()
        )));
    }
    Ok(system.factor()?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_solve() {
        let n = 5;
        let zeros = vec![c(0.0); n - 1];
        let rhs: Vec<_> = (0..n).map(|i| c(if i == 1 { 1.0 } else { 0.0 })).collect();
        let x = solve_tridiagonal(&zeros, &vec![c(1.0); n], &zeros, &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn two_by_two() {
        let x = solve_tridiagonal(&[c(-1.0)], &[c(2.0), c(2.0)], &[c(-1.0)], &[c(1.0), c(0.0)]).unwrap();
        assert!((x[0] - c(2.0 / 3.0)).norm() < 1e-15);
        assert!((x[1] - c(1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn one_by_one_and_shape_errors() {
        let x = solve_tridiagonal(&[], &[c(4.0)], &[], &[c(2.0)]).unwrap();
        assert_eq!(x, vec![c(0.5)]);
        assert!(matches!(
            solve_tridiagonal(&[], &[], &[], &[]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            solve_tridiagonal(&[c(1.0)], &[c(1.0), c(1.0)], &[], &[c(1.0), c(1.0)]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_leading_pivot_uses_pivoting() {
        // [[0, 1], [1, 0]] x = [2, 3]
        let t = Tridiagonal::new(vec![c(1.0)], vec![c(0.0), c(0.0)], vec![c(1.0)]).unwrap();
        let f = t.factor().unwrap();
        assert!(f.is_pivoted());
        let x = f.solve(&[c(2.0), c(3.0)]);
        assert!((x[0] - c(3.0)).norm() < 1e-15);
        assert!((x[1] - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_system_is_reported() {
        let t = Tridiagonal::new(vec![c(1.0)], vec![c(1.0), c(1.0)], vec![c(1.0)]).unwrap();
        assert!(matches!(t.factor(), Err(Error::Singular { .. })));
    }

    #[test]
    fn random_dominant_50() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut z = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let lower: Vec<_> = (0..n - 1).map(|_| z()).collect();
        let upper: Vec<_> = (0..n - 1).map(|_| z()).collect();
        let diag: Vec<_> = (0..n).map(|_| z() + c(3.0)).collect();
        let rhs: Vec<_> = (0..n).map(|_| z()).collect();
        let t = Tridiagonal::new(lower, diag, upper).unwrap();
        let x = t.factor().unwrap().solve(&rhs);
        assert!(t.relative_residual(&x, &rhs) < 1e-12);
    }

    proptest! {
        #[test]
        fn pivoted_and_thomas_agree(
            vals in prop::collection::vec(-1.0f64..1.0, 40),
            shift in 2.5f64..5.0,
        ) {
            let n = 10;
            let cv = |k: usize| Complex64::new(vals[k], vals[(k + 17) % 40]);
            let lower: Vec<_> = (0..n - 1).map(cv).collect();
            let upper: Vec<_> = (0..n - 1).map(|i| cv(i + 10)).collect();
            let diag: Vec<_> = (0..n).map(|i| cv(i + 20) + c(shift)).collect();
            let rhs: Vec<_> = (0..n).map(|i| cv(i + 30)).collect();
            let t = Tridiagonal::new(lower, diag, upper).unwrap();
            let a = t.thomas().unwrap().solve(&rhs);
            let b = t.pivoted().unwrap().solve(&rhs);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            prop_assert!(t.relative_residual(&b, &rhs) < 1e-12);
        }
    }
}
