use thiserror::Error;

/// Errors raised by the time-integration engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported BDF order {0}; only orders 1, 2 and 3 are available")]
    UnsupportedOrder(usize),

    #[error("history holds {available} states but the stencil needs {required}")]
    HistoryUnderflow { required: usize, available: usize },

    #[error("state layout mismatch: {0}")]
    Layout(String),

    #[error("stencil step sizes do not match the history spacing")]
    StencilMismatch,

    #[error("matrix is singular at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("error estimator failed: {0}")]
    EstimatorFailed(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
