use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the crate.
///
/// `Diverged` is special: it carries the partial training record so callers
/// can inspect the last finite state instead of losing the whole run.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("network structure error: {0}")]
    Structure(String),

    #[error("parameter manifests do not match: {0}")]
    ManifestMismatch(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("model digests differ: {0} vs {1}")]
    DigestMismatch(String, String),

    #[error("trajectory is degenerate: {0}")]
    DegenerateTrajectory(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Record of everything up to the last finite snapshot.
        partial: Box<crate::train::TrajectoryRecord>,
    },

    #[error("evaluation failed at alpha = {alpha}: {source}")]
    CurveEval {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    FileFormat { path: PathBuf, message: String },

    #[error("{path}: unsupported format version {found}, expected {expected}")]
    FileVersion {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("{path}: truncated: {message}")]
    Truncated { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
