use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid rate function: {0}")]
    InvalidRate(String),

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Traffic intensity at or above one, where the stationary predictors diverge.
    #[error("unstable operating point: rho = {rho}")]
    UnstablePoint { rho: f64 },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no snapshot recorded at epoch {0}")]
    MissingSnapshot(f64),

    #[error("virtual job still in system {cap} time units after epoch {epoch}")]
    ReplayCapExceeded { epoch: f64, cap: f64 },

    #[error("need at least 2 replications for a confidence interval, got {0}")]
    TooFewReplications(usize),

    #[error("series grids are not aligned: {0}")]
    Misaligned(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
