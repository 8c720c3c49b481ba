use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid sample from {vm_id}: {reason}")]
    InvalidSample { vm_id: String, reason: String },

    #[error("sum of core frequencies {total_ghz} GHz exceeds fleet maximum {max_ghz} GHz")]
    CapacityExceedsFleetMax { total_ghz: f64, max_ghz: f64 },

    #[error("active memory {active} bytes exceeds fleet maximum {ram_max} bytes")]
    MemoryExceedsFleetMax { active: u64, ram_max: u64 },

    #[error("value {value} outside encoder range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("input width {got} does not match expected width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("capacity repository holds no measurements")]
    NoCapacityData,

    #[error("unknown VM type `{0}`")]
    UnknownVmType(String),

    #[error("no candidate VM type can serve the minimum observed user count")]
    SelectionInfeasible,

    #[error("the regression model has not been trained on any sample yet")]
    ModelNotTrained,

    #[error("model weights became non-finite after a training step")]
    NonFiniteWeights,

    #[error("unsupported snapshot version {found} (expected {expected})")]
    SnapshotVersion { expected: u32, found: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("binary snapshot: {0}")]
    Snapshot(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
