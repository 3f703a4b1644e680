use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] obdd_core::Error),
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("no delay set with separation {min_sep} found after {draws} draws")]
    InfeasibleSeparation { min_sep: f64, draws: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
    #[error("malformed file: {0}")]
    Malformed(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
