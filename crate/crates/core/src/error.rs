use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid memory kernel: {0}")]
    InvalidKernel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical blowup at t = {t}: {detail}")]
    NumericalBlowup { t: f64, detail: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalBlowup { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
