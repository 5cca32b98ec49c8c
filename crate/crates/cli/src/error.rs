use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Failure of a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed files. Exit code 2.
    #[error("input error: {0}")]
    Input(String),
    /// Numerically degenerate data or a diverged computation. Exit code 3.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<houghvp::Error> for CliError {
    fn from(e: houghvp::Error) -> Self {
        use houghvp::Error as E;
        match e {
            E::Dimension(_) | E::Shape { .. } | E::InvalidArgument(_) | E::Checkpoint(_) => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("json: {e}"))
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        CliError::Input(format!("image: {e}"))
    }
}
