use std::path::{Path, PathBuf};

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] evclust::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unrecognized input format in {}: header `{header}`", path.display())]
    Format { path: PathBuf, header: String },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        use evclust::Error as E;
        match self {
            Self::Core(e) => match e {
                E::Parse { .. } => "parse",
                E::Validation(_) => "validation",
                E::Domain(_) => "domain",
                E::Degenerate(_) => "degenerate",
                E::NonConvergence { .. } => "non_convergence",
                E::UnboundedInterval { .. } => "unbounded_interval",
                E::InsufficientOverlap { .. } => "insufficient_overlap",
                E::EmptyStation(_) => "empty_station",
                E::BootstrapExhausted { .. } => "bootstrap_exhausted",
                E::Io(_) => "io",
                E::Csv(_) => "csv",
                E::Json(_) => "json",
            },
            Self::Io { .. } => "io",
            Self::Config(_) => "config",
            Self::Format { .. } => "format",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let path = match self {
            Self::Io { path, .. } | Self::Format { path, .. } => Some(path.display().to_string()),
            _ => None,
        };
        json!({ "error": self.kind(), "message": self.to_string(), "path": path })
    }
}
