//! Classical classifiers and the probability contract they share.
//!
//! Every model maps one input to a [`VotePair`]: a toxic / non-toxic
//! probability pair in `[0, 1]` summing to 1.

mod config;
mod knn;
mod linear;
mod tree;

use serde::{Deserialize, Serialize};

use crate::label::Label;

pub use config::{BoostingConfig, ForestConfig, KnnConfig, LinearConfig, Preset, TreeConfig};
pub use knn::{knn_predict, KnnModel};
pub use linear::{fit_linear, linear_decision, linear_gradient, linear_loss, LinearKind, LinearModel, Link};
pub use tree::{
    fit_decision_tree, fit_forest, fit_gradient_boosting, fit_random_forest, forest_vote, sqrt_features, BoostedModel,
    DecisionTree, ForestKind, ForestModel, TreeEnsemble, TreeNode,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("input has column {found} but the model is {expected} wide")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("training data is empty")]
    EmptyTraining,
    #[error("no token of the input is in the vocabulary")]
    EmptyAfterEncoding,
    #[error("sequence has no tokens")]
    EmptySequence,
    #[error("sequence of length {len} is shorter than the kernel width {width}")]
    SequenceTooShort { len: usize, width: usize },
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Toxic / non-toxic probability pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VotePair {
    pub toxic_prob: f64,
    pub nontoxic_prob: f64,
}

impl VotePair {
    /// Pair whose non-toxic side is the exact complement of `toxic_prob`.
    pub fn from_toxic(toxic_prob: f64) -> Self {
        VotePair {
            toxic_prob,
            nontoxic_prob: 1.0 - toxic_prob,
        }
    }

    pub fn uniform() -> Self {
        Self::from_toxic(0.5)
    }

    pub fn certain(label: Label) -> Self {
        Self::from_toxic(label.target())
    }

    pub fn prob(&self, label: Label) -> f64 {
        match label {
            Label::Toxic => self.toxic_prob,
            Label::NonToxic => self.nontoxic_prob,
        }
    }

    /// Argmax with exact ties going to `NonToxic`.
    pub fn argmax(&self) -> Label {
        if self.toxic_prob > self.nontoxic_prob {
            Label::Toxic
        } else {
            Label::NonToxic
        }
    }
}

/// A trained model that yields class probabilities for inputs of type `X`.
pub trait ProbabilisticClassifier<X: ?Sized> {
    fn predict_proba(&self, x: &X) -> Result<VotePair, ModelError>;

    fn predict(&self, x: &X) -> Result<Label, ModelError> {
        self.predict_proba(x).map(|p| p.argmax())
    }
}

impl<X: ?Sized, M: ProbabilisticClassifier<X> + ?Sized> ProbabilisticClassifier<X> for &M {
    fn predict_proba(&self, x: &X) -> Result<VotePair, ModelError> {
        (**self).predict_proba(x)
    }

    fn predict(&self, x: &X) -> Result<Label, ModelError> {
        (**self).predict(x)
    }
}

impl<X: ?Sized, M: ProbabilisticClassifier<X> + ?Sized> ProbabilisticClassifier<X> for Box<M> {
    fn predict_proba(&self, x: &X) -> Result<VotePair, ModelError> {
        (**self).predict_proba(x)
    }

    fn predict(&self, x: &X) -> Result<Label, ModelError> {
        (**self).predict(x)
    }
}

/// Logistic function, stable for large `|value|`.
pub fn sigmoid(value: f64) -> f64 {
    if value >= 0.0 {
        1.0 / (1.0 + (-value).exp())
    } else {
        let e = value.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn require_both_classes(y: &[Label]) -> Result<(), ModelError> {
    if y.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    let first = y[0];
    if y.iter().all(|&l| l == first) {
        return Err(ModelError::SingleClassTraining);
    }
    Ok(())
}
