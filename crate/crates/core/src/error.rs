use thiserror::Error;

use crate::densities::MixtureDensity;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("all mixture weights are zero")]
    AllWeightsZero,

    #[error("mixture components disagree on kind or degrees of freedom")]
    MixedKinds,

    #[error("invalid weight {0}: weights must be finite and non-negative")]
    InvalidWeight(f64),

    #[error("target support is not a bounded box")]
    UnboundedSupport,

    #[error("cannot partition {total} into {parts} positive parts")]
    PartitionUnderflow { total: usize, parts: usize },

    #[error("no chain patch survived filtering")]
    NoPatches,

    #[error("all importance weights are zero")]
    AllZeroWeights,

    #[error("every mixture component is dead")]
    AllComponentsDead,

    /// PMC stopped because no component survived; carries the proposal that was
    /// in use when the failure happened.
    #[error("PMC failed after {steps} update step(s): every component died")]
    PmcFailed {
        steps: usize,
        last_proposal: Box<MixtureDensity>,
    },

    #[error("hierarchical clustering has no live output component")]
    NoLiveOutputs,

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("no analytic evidence available for this target")]
    NoOracle,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
