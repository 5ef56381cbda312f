use thiserror::Error;

/// Errors raised by solvers, evaluators and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid team specification: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("ill-posed estimator: {0}")]
    IllPosedEstimator(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("matrix {0} is singular or not positive definite")]
    Singular(&'static str),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("affine map is not a contraction (spectral radius {0})")]
    NonContraction(f64),

    #[error("iteration and direct solve disagree by {0:e}")]
    Inconsistent(f64),

    #[error("(A, B) is not controllable (rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
