use thiserror::Error;

/// Library error type. The CLI maps these onto process exit codes, so the
/// variants distinguish configuration problems, convergence failures, and
/// truncation-health failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("factor {index}: expected a {expected} factor, found {found}")]
    KindMismatch {
        index: usize,
        expected: &'static str,
        found: &'static str,
    },

    #[error("factor index {index} out of range for a space with {n_factors} factors")]
    FactorIndex { index: usize, n_factors: usize },

    #[error("space mismatch: {0} vs {1}")]
    SpaceMismatch(String, String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator not Hermitian: max |A - A^dag| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("density-matrix invariant violated: {0}")]
    StateInvariant(String),

    #[error("eigendecomposition failed: {0}")]
    Eig(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("steady-state solve did not converge: residual {residual:.3e} exceeds tolerance {tolerance:.3e} (method {method})")]
    Convergence {
        residual: f64,
        tolerance: f64,
        method: &'static str,
    },

    #[error("steady-state kernel looks degenerate: solutions from two trace-row placements differ by Bures {distance:.3e}")]
    DegenerateKernel { distance: f64 },

    #[error("truncation health violated: {0}")]
    TruncationHealth(String),

    #[error("trajectory failed: {0}")]
    Trajectory(String),
}

pub type Result<T> = std::result::Result<T, Error>;
