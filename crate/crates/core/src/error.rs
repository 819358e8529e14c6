use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid language code {0:?}: expected three lowercase ASCII letters")]
    InvalidIso(String),

    #[error("invalid language combination: {0}")]
    InvalidCombo(String),

    #[error("language {0:?} is not in the registry")]
    UnknownLanguage(String),

    #[error("duplicate {kind} record: {key}")]
    Duplicate { kind: &'static str, key: String },

    #[error("evaluation language {eval} is not part of combination {combo}")]
    EvalNotInCombo { eval: String, combo: String },

    #[error("score {score} out of range for {key}: scores must be finite and within [0, 100]")]
    ScoreOutOfRange { key: String, score: f64 },

    #[error("repetition count is not constant for {model}/{task}: {detail}")]
    RepCount {
        model: String,
        task: String,
        detail: String,
    },

    #[error("step {steps} for {key} is not in the declared step grid")]
    StepNotInGrid { key: String, steps: u32 },

    #[error("no baseline for {model}/{task} target {target}")]
    MissingBaseline {
        model: String,
        task: String,
        target: String,
    },

    #[error("baseline is zero for {model}/{task} target {target}; transfer score is undefined")]
    ZeroBaseline {
        model: String,
        task: String,
        target: String,
    },

    #[error("no runs for cell {0}")]
    MissingCell(String),

    #[error("no interaction record for combination {combo} evaluated on {eval}")]
    MissingInteraction { combo: String, eval: String },

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("not enough data: {0}")]
    Insufficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("report {kind} cannot be rendered as {format}")]
    IncompatibleFormat { kind: String, format: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
