use std::path::Path;

/// Failures of a command, each with a stable code for the diagnostic line.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] imave::Error),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn csv(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Io { path: "csv".into(), message: e.to_string() },
            _ => CliError::Parse(e.to_string()),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "Io",
            CliError::Parse(_) => "ParseError",
            CliError::Usage(_) => "InvalidArgument",
        }
    }

    /// `ERROR <code>: <message>` on a single line.
    pub fn diagnostic(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        format!("ERROR {}: {}", self.code(), message.trim())
    }
}
