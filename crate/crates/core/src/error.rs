use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a spectrally negative model")]
    NotSpectrallyNegative,

    #[error("net profit condition violated: mean drift {drift} is not positive")]
    NetProfitViolated { drift: f64 },

    #[error("root finding did not converge after {iterations} iterations; bracket [{lo}, {hi}]")]
    RootNotConverged { lo: f64, hi: f64, iterations: usize },

    #[error("Laplace inversion unstable at x = {x}: consecutive orders differ by {rel_diff:e} (relative)")]
    InversionUnstable { x: f64, rel_diff: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance; error estimate {error:e}")]
    QuadratureFailed { a: f64, b: f64, error: f64 },

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("rejection sampler exceeded {0} iterations")]
    RejectionLimit(usize),

    #[error("query inconsistent with observation scheme: {0}")]
    InconsistentQuery(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
