use lagrangia_core::Error as CoreError;

/// Failures of a scenario run, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl LabError {
    pub fn config(field: &str, msg: &str) -> Self {
        LabError::Config(format!("{field}: {msg}"))
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        LabError::Io { path: path.display().to_string(), source }
    }

    /// 2 for configuration and i/o problems, 3 for numerical failures.
    /// Gate failures are not errors; they exit with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io { .. } => 2,
            LabError::Numerical(_) => 3,
        }
    }
}

/// Core errors raised while building the initial state are configuration
/// errors; anything later is numerical.
pub fn setup(e: CoreError) -> LabError {
    LabError::Config(e.to_string())
}

pub fn numerical(e: CoreError) -> LabError {
    LabError::Numerical(e)
}
