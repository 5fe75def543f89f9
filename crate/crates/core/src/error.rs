//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tensor size {size} exceeds the dense-oracle cap {cap}; this path is for small test instances only")]
    SizeCapExceeded { size: usize, cap: usize },

    /// A marginal of the current plan has a zero entry, so the scaling
    /// update for that node would divide by zero.
    #[error("zero denominator while updating the potential of node {node}")]
    ZeroDenominator { node: usize },

    #[error("non-finite message at node {node}")]
    NonFiniteMessage { node: usize },

    #[error("non-finite Sinkhorn value at sweep {sweep}")]
    NonFiniteObjective { sweep: usize },

    #[error("nonpositive potential entry at node {node} where the marginal weight is positive")]
    NonPositivePotential { node: usize },

    #[error(
        "marginal of node {node} underflowed ({value:e} < 1e-300); try a larger regularization eta"
    )]
    Underflow { node: usize, value: f64 },

    #[error("Hermite interpolation system is numerically singular for smoothness p = {p}; try a smaller p")]
    SingularHermiteSystem { p: usize },

    #[error("point {index} lies outside the transform range (|x|_inf = {coord:e} >= tau = {tau:e})")]
    PointOutOfRange { index: usize, coord: f64, tau: f64 },

    #[error("window cutoff {cutoff} too large for oversampled grid of size {grid}")]
    CutoffTooLarge { cutoff: usize, grid: usize },

    #[error("coefficient grid of {entries} entries exceeds the memory budget of {budget}")]
    MemoryBudget { entries: usize, budget: usize },

    #[error("unsupported point dimension d = {d}; fast summation covers d in 1..=3")]
    UnsupportedDimension { d: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical iteration itself, as opposed to
    /// bad inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroDenominator { .. }
                | Error::NonFiniteMessage { .. }
                | Error::NonFiniteObjective { .. }
                | Error::NonPositivePotential { .. }
                | Error::Underflow { .. }
                | Error::SingularHermiteSystem { .. }
        )
    }
}
