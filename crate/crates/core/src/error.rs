use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LchsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no convergence after {steps} steps (last two iterates differ by {distance:e})")]
    Convergence { steps: usize, distance: f64 },

    #[error("L(t) is not positive semi-definite at t = {t}: smallest eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { t: f64, eigenvalue: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LchsError>;
