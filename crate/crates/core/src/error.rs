use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Spec-file syntax or semantic problem, with the 1-based source line.
    #[error("spec line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Configuration rejected before any numerics ran.
    #[error("config error: {0}")]
    Config(String),

    /// Evaluation point outside the metric's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Norm or support body failed a validity requirement.
    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    /// Potential reconstruction refused: the 1-form is not closed.
    #[error("one-form is not closed (curl residual {curl_residual:.3e} exceeds {threshold:.3e})")]
    NotClosed { curl_residual: f64, threshold: f64 },

    /// Adaptive integrator could not make progress.
    #[error("integration failure at s = {s:.6}: step size underflow")]
    StepUnderflow {
        s: f64,
        /// Trace accumulated up to the last accepted step.
        trace: Box<crate::flow::GeodesicTrace>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
