//! End-to-end orchestration: configuration, stage caching, model artifacts,
//! experiments, prediction and the seeded t-test protocol.

pub mod artifacts;
pub mod cache;
pub mod config;
mod run;

use std::fmt;
use std::path::PathBuf;

pub use artifacts::{ModelFile, PreprocessingRef, TrainedModel, MODEL_FORMAT_VERSION};
pub use config::{ConfigError, ExperimentConfig, Family, LeakageMode, ModelConfig, ModelSpec, Overrides};
pub use run::{
    build_folds, evaluate, predict_text, prepare, run_experiment, run_ttest, train, Fold, Folds, Layout, Prediction,
    Prepared, TTestOutcome, ENSEMBLE_NAME,
};

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Preprocess,
    Vocabulary,
    Resample,
    Split,
    Train(Family),
    Evaluate(String),
    Predict,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Ingest => f.write_str("ingest"),
            Stage::Preprocess => f.write_str("preprocess"),
            Stage::Vocabulary => f.write_str("vocabulary"),
            Stage::Resample => f.write_str("resample"),
            Stage::Split => f.write_str("split"),
            Stage::Train(family) => write!(f, "train {family}"),
            Stage::Evaluate(model) => write!(f, "evaluate {model}"),
            Stage::Predict => f.write_str("predict"),
            Stage::Output => f.write_str("output"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {message}")]
    Data { stage: Stage, message: String },
    #[error("{stage}: {message}")]
    Runtime { stage: Stage, message: String },
    #[error("{}: {what} hash {found} does not match the recorded {expected}", path.display())]
    ManifestMismatch {
        path: PathBuf,
        what: &'static str,
        expected: String,
        found: String,
    },
}

impl PipelineError {
    pub fn data(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError::Data {
            stage,
            message: message.to_string(),
        }
    }

    pub fn runtime(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError::Runtime {
            stage,
            message: message.to_string(),
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data { .. } | PipelineError::ManifestMismatch { .. } => 3,
            PipelineError::Runtime { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
