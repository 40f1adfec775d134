use thiserror::Error;

/// Errors produced by every stage of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("member {member}: closed before outcome window (close month {close}, anchor {anchor})")]
    ClosedBeforeOutcome { member: String, close: i64, anchor: i64 },

    #[error("member {member}: empty observation window for attribute `{attribute}`")]
    EmptyWindow { member: String, attribute: String },

    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown category `{category}` in column `{column}`")]
    UnknownCategory { column: String, category: String },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("zero variance")]
    ZeroVariance,

    #[error("single-class data: {0}")]
    SingleClass(String),

    #[error("too few minority samples for k (minority {minority}, k {k})")]
    TooFewMinority { minority: usize, k: usize },

    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,

    #[error("diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("rfe iteration {iteration}: {source}")]
    Rfe {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate treatment: {0}")]
    DegenerateTreatment(String),

    #[error("graph: {0}")]
    Graph(String),

    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("linear algebra: {0}")]
    Linalg(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
