use thiserror::Error;

/// Errors raised by the simulator and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hamiltonian is not hermitian (max |H - H^dagger| = {defect:e})")]
    NonHermitian { defect: f64 },

    #[error("negative evolution time {0:e} s")]
    NegativeTime(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rejection sampling failed after {attempts} attempts (temperature too close to trap depth?)")]
    Sampling { attempts: usize },

    #[error("blockade calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {reason}")]
    Fit {
        reason: String,
        /// Best grid-search solution available when refinement failed.
        best: Option<Box<crate::analysis::SinusoidFit>>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
