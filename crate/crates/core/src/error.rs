use thiserror::Error;

use crate::dae::DaeParameters;
use crate::numerics::CasoratiMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Training produced a non-finite loss. `checkpoint` holds the last
    /// parameters for which every loss evaluation was finite.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged {
        epoch: usize,
        checkpoint: Box<DaeParameters>,
    },

    /// A data-consistency solve broke down inside the alternating loop.
    /// `partial` is the last finite iterate.
    #[error("reconstruction failed at outer iteration {outer_iter}: {message}")]
    ReconDiverged {
        outer_iter: usize,
        message: String,
        partial: Box<CasoratiMatrix>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in the numerics rather than in
    /// the caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::TrainingDiverged { .. } | Error::ReconDiverged { .. }
        )
    }
}

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
