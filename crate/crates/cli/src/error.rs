use lchs::LchsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] LchsError),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    /// 2 config, 3 numeric failure, 4 invariant violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Core(e) => match e {
                LchsError::Dimension(_) | LchsError::Domain(_) | LchsError::Precondition(_) | LchsError::Format(_) => 2,
                LchsError::Numeric(_) | LchsError::Convergence { .. } | LchsError::NotPositiveSemidefinite { .. } => 3,
            },
            Self::Io(_) => 3,
            Self::Invariant(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numeric",
            _ => "invariant",
        }
    }

    /// `error kind=<kind> code=<n> message="<json-escaped text>"`
    pub fn line(&self) -> String {
        let msg = serde_json::to_string(&self.to_string()).expect("strings serialize");
        format!("error kind={} code={} message={msg}", self.kind(), self.exit_code())
    }
}
