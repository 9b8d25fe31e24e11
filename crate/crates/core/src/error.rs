use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Nyquist violation: {what} = {value} exceeds limit {limit}")]
    Nyquist {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("frequency {0:?} is not on the lattice")]
    OffLattice(Vec<f64>),

    #[error("vector is not null: |z.z| = {0:e}")]
    NotNull(f64),

    #[error("ellipticity violated: min = {min}, max = {max}")]
    Ellipticity { min: f64, max: f64 },

    #[error("conductivity differs from 1 by {deviation:e} outside radius {radius}")]
    Support { radius: f64, deviation: f64 },

    #[error("potential routes disagree by {0:e} (relative L2); grid under-resolves the conductivity")]
    UnderResolved(f64),

    #[error("contraction failed for zeta = {zeta} after {iterations} iterations (ratio {ratio})")]
    ContractionFailure {
        ratio: f64,
        iterations: usize,
        zeta: String,
    },

    #[error("no convergence within {max_iter} iterations (last step ratio {ratio})")]
    MaxIterations { max_iter: usize, ratio: f64 },

    #[error("all {attempts} candidate rotations rejected for eps = {eps}; try eps above {suggestion}")]
    AllRejected {
        attempts: usize,
        eps: f64,
        suggestion: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
