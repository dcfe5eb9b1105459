//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("singular space is nontrivial (dimension {dim}); no finite k0 index")]
    NontrivialSingularSpace { dim: usize },

    #[error("Hamilton map has an eigenvalue within {tol:e} of the real axis: {eig}")]
    RealEigenvalue { eig: num_complex::Complex64, tol: f64 },

    #[error("phase block φ''_zy is numerically singular (|det| = {det:e})")]
    SingularBlock { det: f64 },

    #[error("canonical map is not generated by an FBI phase: {0}")]
    NotGenerating(String),

    #[error("recovered Im φ''_yy is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositive { min_eig: f64 },

    #[error("weight is not strictly plurisubharmonic (Levi min eigenvalue {min_eig:e})")]
    NotStrictlyPsh { min_eig: f64 },

    #[error("caustic: graph projection is singular (condition {cond:e})")]
    Caustic { cond: f64 },

    #[error("no good complex time certified on the search grid ({candidates} candidates, best gap {best_gap:e})")]
    NoGoodTime { candidates: usize, best_gap: f64 },

    #[error("trajectory norm {norm:e} exceeded the validity bound {bound:e}")]
    StepOverflow { norm: f64, bound: f64 },

    #[error("integrand mass at the grid boundary ({boundary:e}) exceeds {threshold:e} of the maximum")]
    BoundaryMass { boundary: f64, threshold: f64 },

    #[error("grid truncates the state: boundary value {boundary:e} of peak {peak:e}")]
    SupportTruncated { boundary: f64, peak: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("kernel exponent is not comparable to -|z-w|^2: {0}")]
    NotComparable(String),

    #[error("symbol is outside the automated reduction cases: {0}")]
    UnsupportedReduction(String),

    #[error("linear algebra backend failure: {0}")]
    Linalg(String),
}
