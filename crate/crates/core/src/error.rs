use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frequency {re}{im:+}i is outside the admissible half-plane: {reason}")]
    InvalidFrequency { re: f64, im: f64, reason: &'static str },

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("truncation did not converge for {what}: reached level {level} (last change {last_change:e})")]
    NoConvergence {
        what: &'static str,
        level: usize,
        last_change: f64,
    },

    #[error("this quantity requires a catastrophe (alpha + beta > 0)")]
    RequiresCatastrophe,

    #[error("H(s) = {magnitude:e} is too close to zero at s = {re}{im:+}i")]
    SingularH { re: f64, im: f64, magnitude: f64 },

    #[error("limit at s = 0 is unstable for {what}: mismatch {mismatch:e}")]
    LimitMismatch { what: &'static str, mismatch: f64 },

    #[error("laplace inversion did not settle at t = {t}: error estimate {estimate:e}")]
    Inversion { t: f64, estimate: f64 },

    #[error("adaptive quadrature exceeded {panels} panels (error estimate {estimate:e})")]
    Quadrature { panels: usize, estimate: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
