use thiserror::Error;

/// Errors raised by the solvers and pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: n = {0} (need n >= 8)")]
    GridTooCoarse(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coefficient {value:.6e} at node {node} is below the admissible bound {bound:.6e}")]
    CoefficientBelowBound { node: usize, value: f64, bound: f64 },

    #[error("rho = {rho} is not below the certified threshold {threshold}")]
    RhoAboveThreshold { rho: f64, threshold: f64 },

    #[error("hypothesis not certified: {0}")]
    HypothesisNotCertified(String),

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("tridiagonal system is singular at row {0}")]
    TridiagonalBreakdown(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of an iterative method, as opposed to bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::TridiagonalBreakdown(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
