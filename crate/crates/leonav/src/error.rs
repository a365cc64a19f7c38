use std::path::PathBuf;

use leonav_core::bound::BoundError;
use leonav_core::fusion::{FusionError, RunError};
use leonav_core::tle::TleError;

/// Harness failure, grouped by CLI exit code: 2 configuration, 3 data,
/// 4 numerical divergence.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("catalog: {0}")]
    Tle(#[from] TleError),
    #[error("only {visible} {constellation} satellites visible, {required} required")]
    InsufficientVisibility { constellation: &'static str, visible: usize, required: usize },
    #[error("filter diverged: {0}")]
    Divergence(String),
    #[error("filter: {0}")]
    Filter(RunError),
    #[error("bound: {0}")]
    Bound(BoundError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Divergence(_) => 4,
            HarnessError::Bound(BoundError::SingularInformation) => 4,
            _ => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        HarnessError::Csv { path: path.into(), source }
    }
}

impl From<RunError> for HarnessError {
    fn from(e: RunError) -> Self {
        match &e.source {
            FusionError::CovarianceBlowup { .. } | FusionError::SingularInnovation(_) | FusionError::Estimation(_) => {
                HarnessError::Divergence(e.to_string())
            }
            _ => HarnessError::Filter(e),
        }
    }
}

impl From<BoundError> for HarnessError {
    fn from(e: BoundError) -> Self {
        HarnessError::Bound(e)
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
