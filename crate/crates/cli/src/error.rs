use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Module(fraccite::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Module(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Module(_) => "module",
        }
    }

    /// One-line JSON error for stderr.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Io { path, .. } = self {
            obj["path"] = serde_json::Value::String(path.display().to_string());
        }
        obj.to_string()
    }
}

impl From<fraccite::Error> for CliError {
    fn from(e: fraccite::Error) -> Self {
        match e {
            fraccite::Error::Io { path, source } => CliError::Io { path, source },
            other => CliError::Module(other),
        }
    }
}
