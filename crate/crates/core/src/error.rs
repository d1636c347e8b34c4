use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("size limit: {0}")]
    SizeLimit(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("no exceedances above threshold {threshold}")]
    NoExceedances { threshold: f64 },

    #[error("insufficient exceedances: {k} < {floor}")]
    InsufficientExceedances { k: usize, floor: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("fit did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("invalid reparametrization: 1 + xi * W^-1(F(u)) = {0} <= 0")]
    InvalidReparametrization(f64),

    #[error("unbounded quantile for p = {0}")]
    UnboundedQuantile(f64),

    #[error("missing ground energy for instance {0}")]
    MissingGroundEnergy(u64),

    #[error("unmatched instance ids: {0:?}")]
    UnmatchedIds(Vec<u64>),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint config mismatch:\n{0}")]
    CheckpointMismatch(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest mismatch in {0:?}")]
    ManifestMismatch(Vec<String>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
