//! Embedding LSTM and CNN binary classifiers over token-id sequences.
//!
//! Parameters are stored as two flat arrays: the embedding table
//! (`n_ids x embed_dim`, row-major, the last row being padding) and every
//! other weight in a fixed per-architecture layout. Gradients are derived by
//! hand and checked against central finite differences in the tests.

mod cnn;
mod lstm;
mod train;

use serde::{Deserialize, Serialize};

use crate::features::Vocabulary;
use crate::models::{sigmoid, ModelError, ProbabilisticClassifier, VotePair};

pub use cnn::CnnModel;
pub use lstm::LstmModel;
pub use train::{train_neural, TrainReport, TrainSpec};

/// Token ids of one document, padded to `max_len` with the padding id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceExample {
    pub token_ids: Vec<u32>,
    pub true_len: usize,
}

impl SequenceExample {
    pub fn live(&self) -> &[u32] {
        &self.token_ids[..self.true_len]
    }
}

/// Padding id for a vocabulary: one past its last column.
pub fn padding_id(vocab: &Vocabulary) -> u32 {
    vocab.len() as u32
}

pub fn encode_sequence(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Result<SequenceExample, ModelError> {
    let mut token_ids: Vec<u32> = tokens
        .iter()
        .filter_map(|t| vocab.column(t).map(|c| c as u32))
        .take(max_len)
        .collect();
    if token_ids.is_empty() {
        return Err(ModelError::EmptyAfterEncoding);
    }
    let true_len = token_ids.len();
    token_ids.resize(max_len, padding_id(vocab));
    Ok(SequenceExample { token_ids, true_len })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuralKind {
    Lstm,
    Cnn,
}

/// Per-example gradient: dense for the non-embedding weights, one entry per
/// live position for the embedding table.
#[derive(Debug, Clone)]
pub struct ExampleGrad {
    pub weights: Vec<f64>,
    pub embedding: Vec<(u32, Vec<f64>)>,
}

/// Shared surface of the two architectures.
pub trait SequenceNet: Sync {
    fn n_ids(&self) -> usize;
    fn embed_dim(&self) -> usize;
    fn embedding(&self) -> &[f64];
    fn embedding_mut(&mut self) -> &mut [f64];
    fn weights(&self) -> &[f64];
    fn weights_mut(&mut self) -> &mut [f64];

    /// Pre-sigmoid output.
    fn logit(&self, x: &SequenceExample) -> Result<f64, ModelError>;

    /// Binary cross-entropy loss and its gradient.
    #[doc(hidden)]
    fn loss_and_grad(&self, x: &SequenceExample, target: f64) -> Result<(f64, ExampleGrad), ModelError>;

    /// Adapts an encoded example to the architecture's minimum length.
    fn prepare(&self, x: &SequenceExample) -> SequenceExample {
        x.clone()
    }

    fn probability(&self, x: &SequenceExample) -> Result<f64, ModelError> {
        self.logit(x).map(sigmoid)
    }

    fn embed_row(&self, id: u32) -> &[f64] {
        let e = self.embed_dim();
        &self.embedding()[id as usize * e..(id as usize + 1) * e]
    }
}

/// `-log p(target)` from a logit, stable for large magnitudes.
pub(crate) fn bce_from_logit(logit: f64, target: f64) -> f64 {
    // log(1 + e^z) - target * z
    let softplus = if logit > 0.0 {
        logit + (-logit).exp().ln_1p()
    } else {
        logit.exp().ln_1p()
    };
    softplus - target * logit
}

/// Uniform Xavier initialization in place.
pub(crate) fn xavier<R: rand::Rng>(rng: &mut R, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.gen_range(-limit..limit);
    }
}

fn check_ids(x: &SequenceExample, n_ids: usize) -> Result<(), ModelError> {
    if x.true_len == 0 {
        return Err(ModelError::EmptySequence);
    }
    if x.true_len > x.token_ids.len() {
        return Err(ModelError::Invalid("true_len exceeds the sequence".into()));
    }
    if let Some(&bad) = x.live().iter().find(|&&id| id as usize >= n_ids) {
        return Err(ModelError::DimensionMismatch {
            expected: n_ids,
            found: bad as usize + 1,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum NeuralModel {
    Lstm(LstmModel),
    Cnn(CnnModel),
}

impl NeuralModel {
    pub fn kind(&self) -> NeuralKind {
        match self {
            NeuralModel::Lstm(_) => NeuralKind::Lstm,
            NeuralModel::Cnn(_) => NeuralKind::Cnn,
        }
    }

    pub fn net(&self) -> &dyn SequenceNet {
        match self {
            NeuralModel::Lstm(m) => m,
            NeuralModel::Cnn(m) => m,
        }
    }
}

impl ProbabilisticClassifier<SequenceExample> for NeuralModel {
    fn predict_proba(&self, x: &SequenceExample) -> Result<VotePair, ModelError> {
        let net = self.net();
        net.probability(&net.prepare(x)).map(VotePair::from_toxic)
    }
}

/// A sequence model bound to its vocabulary, classifying token lists.
/// Documents with no in-vocabulary token yield `EmptyAfterEncoding`.
pub struct TokenClassifier<'a> {
    pub model: &'a NeuralModel,
    pub vocab: &'a Vocabulary,
    pub max_len: usize,
}

impl ProbabilisticClassifier<[String]> for TokenClassifier<'_> {
    fn predict_proba(&self, tokens: &[String]) -> Result<VotePair, ModelError> {
        let x = encode_sequence(tokens, self.vocab, self.max_len)?;
        self.model.predict_proba(&x)
    }
}

#[cfg(test)]
pub(crate) mod gradcheck {
    use super::*;

    /// Largest relative error between the analytic gradient and central
    /// differences over every parameter. Pairs where both magnitudes are
    /// below `1e-7` compare absolutely.
    pub fn max_relative_error<N: SequenceNet + Clone>(net: &N, x: &SequenceExample, target: f64) -> f64 {
        let h = 1e-5;
        let (_, grad) = net.loss_and_grad(x, target).unwrap();
        let e = net.embed_dim();
        let mut dense_embed = vec![0.0; net.embedding().len()];
        for (id, g) in &grad.embedding {
            for (k, v) in g.iter().enumerate() {
                dense_embed[*id as usize * e + k] += v;
            }
        }
        let loss = |n: &N| n.loss_and_grad(x, target).unwrap().0;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-7);
        let mut worst: f64 = 0.0;
        for i in 0..net.weights().len() {
            let mut plus = net.clone();
            plus.weights_mut()[i] += h;
            let mut minus = net.clone();
            minus.weights_mut()[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(rel(grad.weights[i], fd));
        }
        for (i, &analytic) in dense_embed.iter().enumerate() {
            let mut plus = net.clone();
            plus.embedding_mut()[i] += h;
            let mut minus = net.clone();
            minus.embedding_mut()[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(rel(analytic, fd));
        }
        worst
    }
}
