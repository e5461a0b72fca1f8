//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, numerical kernels and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {delta:e}")]
    NotSymmetric { i: usize, j: usize, delta: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("covariance is singular: eigenvalue {eigenvalue:e} below floor {floor:e}")]
    SingularCovariance { eigenvalue: f64, floor: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),

    #[error("marginal sums differ: {sum0} vs {sum1}")]
    MarginalMismatch { sum0: f64, sum1: f64 },

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error(
        "mixtures are unbalanced (total masses {mass0} vs {mass1}); \
         use unbalanced_gmm_distance for inputs with unequal mass"
    )]
    UnbalancedInput { mass0: f64, mass1: f64 },

    #[error("mixture is not a probability distribution: total mass {total}")]
    NotNormalized { total: f64 },

    #[error("total mass is zero")]
    ZeroMass,

    #[error("model has no components")]
    EmptyModel,

    #[error("node index {index} out of range for graph with {nodes} nodes")]
    InvalidNode { index: usize, nodes: usize },

    #[error("graph is not connected")]
    Disconnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("channel graphs of the two models differ")]
    GraphMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image decode error: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;
