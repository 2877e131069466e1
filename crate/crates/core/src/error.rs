use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: file contains no triples")]
    EmptyGraph(PathBuf),

    #[error("{path}:{line}: unknown entity label `{label}`")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },

    #[error("{path}:{line}: source entity `{label}` is already linked (one-to-one violation)")]
    OneToOne {
        path: PathBuf,
        line: usize,
        label: String,
    },

    #[error("{path}:{line}: duplicate candidate `{source_label}` -> `{target_label}`")]
    DuplicateCandidate {
        path: PathBuf,
        line: usize,
        source_label: String,
        target_label: String,
    },

    #[error("source entity `{0}` has no candidates")]
    NoCandidates(String),

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("labelled target {target} missing from the similarity row of source {source_entity}")]
    MissingTruth { source_entity: usize, target: usize },

    #[error("source entity {0} has an empty candidate list")]
    Coverage(usize),

    #[error("state space {0} exceeds the brute-force guard of 1e6")]
    OracleTooLarge(f64),

    #[error("objective diverged: {0}")]
    Divergence(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
