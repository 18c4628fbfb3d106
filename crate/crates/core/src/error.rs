use thiserror::Error;

/// Errors raised by the inference pipeline and its supporting operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate entry (log_id={log_id}, seq={seq}) at line {line}")]
    DuplicateSeq { log_id: String, seq: u64, line: u64 },

    #[error("unknown component `{0}`")]
    UnknownComponent(String),

    #[error("empty log")]
    EmptyLog,

    #[error("no logs")]
    NoLogs,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot synthesize negatives: every log exhausted its mutation attempts")]
    NegativeSynthesis,

    #[error("component model for `{0}` is not deterministic")]
    NondeterministicModel(String),

    #[error("no model for component `{0}`")]
    MissingModel(String),

    #[error("slice failure in component `{component}`: state {state} has no enabled transition for `{event}`")]
    SliceFailure {
        component: String,
        state: u32,
        event: String,
    },

    #[error("model must have exactly one final state, found {0}")]
    FinalStateCount(usize),

    #[error("inference of component `{component}` failed: {source}")]
    Component {
        component: String,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("deadline exceeded")]
    Timeout,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
