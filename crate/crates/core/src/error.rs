use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("world generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("view width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("reference set is empty")]
    EmptyReferenceSet,

    #[error("no classes to average over")]
    EmptyClassSet,

    #[error("propagated mask has no known pixels; nothing to collect")]
    NothingToCollect,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("not enough free space: {0}")]
    InsufficientFreeSpace(String),

    #[error("unknown {kind} `{value}`")]
    UnknownId { kind: &'static str, value: String },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
