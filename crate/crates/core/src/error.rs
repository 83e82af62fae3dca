use thiserror::Error;

/// Errors raised across the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge after {attempts} start(s): {trace}")]
    NonConvergence { attempts: usize, trace: String },

    #[error("profile likelihood interval is unbounded on the {side} side within [-1, 2]")]
    UnboundedInterval { side: &'static str },

    #[error("stations {a} and {b} share {shared} years, need at least {required}")]
    InsufficientOverlap {
        a: String,
        b: String,
        shared: usize,
        required: usize,
    },

    #[error("station {0} has no retained years")]
    EmptyStation(String),

    #[error("bootstrap exhausted {draws} draws without {replicates} successful refits")]
    BootstrapExhausted { draws: usize, replicates: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
