//! Mini-batch gradient descent on binary cross-entropy.
//!
//! Batch gradients are computed per example in parallel and summed in batch
//! order, so a run is bitwise reproducible for a given seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CnnModel, LstmModel, NeuralKind, NeuralModel, SequenceExample, SequenceNet};
use crate::label::Label;
use crate::models::{require_both_classes, ModelError};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_len: usize,
    pub embed_dim: usize,
    /// LSTM hidden units.
    pub hidden: usize,
    /// CNN filters.
    pub n_filters: usize,
    pub kernel_width: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 5,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            max_len: 200,
            embed_dim: 50,
            hidden: 64,
            n_filters: 100,
            kernel_width: 3,
        }
    }
}

impl TrainSpec {
    /// Smaller and faster-learning network for a few thousand documents.
    pub fn desk() -> Self {
        TrainSpec {
            epochs: 10,
            learning_rate: 0.5,
            embed_dim: 32,
            hidden: 32,
            ..TrainSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let counts = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("n_filters", self.n_filters),
            ("kernel_width", self.kernel_width),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Invalid(format!("{name} must be positive")));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(ModelError::Invalid("learning_rate must be non-negative".into()));
        }
        if self.kernel_width > self.max_len {
            return Err(ModelError::Invalid("kernel_width exceeds max_len".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-example loss of each epoch, accumulated while training.
    pub epoch_losses: Vec<f64>,
}

/// Trains a freshly initialized network. `n_ids` counts the vocabulary plus
/// the padding id.
pub fn train_neural(
    kind: NeuralKind,
    data: &[(SequenceExample, Label)],
    n_ids: usize,
    spec: &TrainSpec,
) -> Result<(NeuralModel, TrainReport), ModelError> {
    spec.validate()?;
    let labels: Vec<Label> = data.iter().map(|(_, l)| *l).collect();
    require_both_classes(&labels)?;
    let mut init = rng::stream(spec.seed, Stream::NeuralInit);
    Ok(match kind {
        NeuralKind::Lstm => {
            let mut net = LstmModel::init(&mut init, n_ids, spec.embed_dim, spec.hidden);
            let report = fit(&mut net, data, spec)?;
            (NeuralModel::Lstm(net), report)
        }
        NeuralKind::Cnn => {
            let mut net = CnnModel::init(&mut init, n_ids, spec.embed_dim, spec.n_filters, spec.kernel_width);
            let report = fit(&mut net, data, spec)?;
            (NeuralModel::Cnn(net), report)
        }
    })
}

pub(crate) fn fit<N: SequenceNet>(
    net: &mut N,
    data: &[(SequenceExample, Label)],
    spec: &TrainSpec,
) -> Result<TrainReport, ModelError> {
    let prepared: Vec<(SequenceExample, f64)> = data.iter().map(|(x, l)| (net.prepare(x), l.target())).collect();
    let e = net.embed_dim();
    let mut epoch_losses = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        let mut shuffle = rng::substream(spec.seed, Stream::NeuralShuffle, epoch as u64);
        let order = rng::permutation(&mut shuffle, prepared.len());
        let mut total = 0.0;
        for batch in order.chunks(spec.batch_size) {
            let frozen: &N = net;
            let grads = batch
                .par_iter()
                .map(|&i| frozen.loss_and_grad(&prepared[i].0, prepared[i].1))
                .collect::<Result<Vec<_>, _>>()?;
            let step = spec.learning_rate / batch.len() as f64;
            let mut acc = vec![0.0; net.weights().len()];
            for (loss, g) in &grads {
                total += loss;
                for (a, v) in acc.iter_mut().zip(&g.weights) {
                    *a += v;
                }
            }
            for (w, a) in net.weights_mut().iter_mut().zip(&acc) {
                *w -= step * a;
            }
            let table = net.embedding_mut();
            for (_, g) in &grads {
                for (id, row) in &g.embedding {
                    let base = *id as usize * e;
                    for (k, v) in row.iter().enumerate() {
                        table[base + k] -= step * v;
                    }
                }
            }
        }
        let mean = total / prepared.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(TrainReport { epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ProbabilisticClassifier;
    use Label::*;

    const PAD: u32 = 10;

    fn seq(ids: &[u32], max_len: usize) -> SequenceExample {
        let mut token_ids = ids.to_vec();
        token_ids.resize(max_len, PAD);
        SequenceExample {
            token_ids,
            true_len: ids.len(),
        }
    }

    /// Toxic examples contain the pattern 1-2, clean ones 3-4; tokens 5..9
    /// are shared filler.
    fn toy() -> Vec<(SequenceExample, Label)> {
        let toxic: [&[u32]; 5] = [&[1, 2, 5], &[5, 1, 2], &[1, 2, 6, 7], &[8, 1, 2], &[6, 1, 2, 9]];
        let clean: [&[u32]; 5] = [&[3, 4, 5], &[5, 3, 4], &[3, 4, 6, 7], &[8, 3, 4], &[6, 3, 4, 9]];
        let mut data = Vec::new();
        for (t, c) in toxic.iter().zip(&clean) {
            data.push((seq(t, 6), Toxic));
            data.push((seq(c, 6), NonToxic));
        }
        data
    }

    fn small(epochs: usize) -> TrainSpec {
        TrainSpec {
            epochs,
            batch_size: 4,
            learning_rate: 0.5,
            seed: 11,
            max_len: 6,
            embed_dim: 8,
            hidden: 6,
            n_filters: 6,
            kernel_width: 2,
        }
    }

    fn accuracy(model: &NeuralModel, data: &[(SequenceExample, Label)]) -> f64 {
        let hits = data.iter().filter(|(x, l)| model.predict(x).unwrap() == *l).count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn memorizes_the_toy_set() {
        let data = toy();
        for kind in [NeuralKind::Lstm, NeuralKind::Cnn] {
            let (model, report) = train_neural(kind, &data, 11, &small(200)).unwrap();
            assert_eq!(accuracy(&model, &data), 1.0, "{kind:?}");
            assert!(
                report.epoch_losses[4] < report.epoch_losses[0],
                "{kind:?}: {:?}",
                &report.epoch_losses[..5]
            );
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = toy();
        let spec = TrainSpec {
            learning_rate: 0.0,
            ..small(3)
        };
        let (model, _) = train_neural(NeuralKind::Lstm, &data, 11, &spec).unwrap();
        let mut init = rng::stream(spec.seed, Stream::NeuralInit);
        let fresh = LstmModel::init(&mut init, 11, spec.embed_dim, spec.hidden);
        assert_eq!(model, NeuralModel::Lstm(fresh));
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let data = toy();
        for kind in [NeuralKind::Lstm, NeuralKind::Cnn] {
            let a = train_neural(kind, &data, 11, &small(5)).unwrap();
            let b = train_neural(kind, &data, 11, &small(5)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_single_class_and_bad_specs() {
        let data: Vec<_> = toy().into_iter().filter(|(_, l)| l.is_toxic()).collect();
        assert_eq!(
            train_neural(NeuralKind::Cnn, &data, 11, &small(1)).unwrap_err(),
            ModelError::SingleClassTraining
        );
        let bad = TrainSpec {
            batch_size: 0,
            ..small(1)
        };
        assert!(train_neural(NeuralKind::Lstm, &toy(), 11, &bad).is_err());
    }
}
