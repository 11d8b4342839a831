//! One-dimensional CNN: valid convolution of width `width` over the embedded
//! sequence, ReLU, global max-pooling per filter, affine output unit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bce_from_logit, check_ids, xavier, ExampleGrad, SequenceExample, SequenceNet};
use crate::models::{sigmoid, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub n_ids: usize,
    pub embed_dim: usize,
    pub n_filters: usize,
    pub width: usize,
    /// `n_ids x embed_dim`, row-major.
    pub embedding: Vec<f64>,
    /// Kernels `F x width x E`, filter biases `F`, output weights `F`,
    /// output bias.
    pub weights: Vec<f64>,
}

struct Layout {
    e: usize,
    f: usize,
    w: usize,
}

impl Layout {
    fn kernel_len(&self) -> usize {
        self.w * self.e
    }
    fn filter_bias(&self) -> usize {
        self.f * self.kernel_len()
    }
    fn out(&self) -> usize {
        self.filter_bias() + self.f
    }
    fn out_bias(&self) -> usize {
        self.out() + self.f
    }
    fn len(&self) -> usize {
        self.out_bias() + 1
    }
}

/// Per-filter pooled activation and the first position attaining it.
struct Pooled {
    value: Vec<f64>,
    position: Vec<usize>,
    active: Vec<bool>,
}

impl CnnModel {
    pub fn zeros(n_ids: usize, embed_dim: usize, n_filters: usize, width: usize) -> Self {
        let layout = Layout {
            e: embed_dim,
            f: n_filters,
            w: width,
        };
        CnnModel {
            n_ids,
            embed_dim,
            n_filters,
            width,
            embedding: vec![0.0; n_ids * embed_dim],
            weights: vec![0.0; layout.len()],
        }
    }

    pub fn init<R: Rng>(rng: &mut R, n_ids: usize, embed_dim: usize, n_filters: usize, width: usize) -> Self {
        let mut m = Self::zeros(n_ids, embed_dim, n_filters, width);
        let l = m.layout();
        xavier(rng, &mut m.embedding, n_ids, embed_dim);
        xavier(rng, &mut m.weights[..l.filter_bias()], l.kernel_len(), n_filters);
        xavier(rng, &mut m.weights[l.out()..l.out_bias()], n_filters, 1);
        m
    }

    fn layout(&self) -> Layout {
        Layout {
            e: self.embed_dim,
            f: self.n_filters,
            w: self.width,
        }
    }

    pub fn check_shapes(&self) -> Result<(), ModelError> {
        if self.width == 0
            || self.embedding.len() != self.n_ids * self.embed_dim
            || self.weights.len() != self.layout().len()
        {
            return Err(ModelError::Invalid(
                "CNN parameter arrays do not match its shape".into(),
            ));
        }
        Ok(())
    }

    fn pool(&self, x: &SequenceExample) -> Result<Pooled, ModelError> {
        check_ids(x, self.n_ids)?;
        if x.true_len < self.width {
            return Err(ModelError::SequenceTooShort {
                len: x.true_len,
                width: self.width,
            });
        }
        let l = self.layout();
        let e = l.e;
        // the embedded sequence, contiguous so a window is a single slice
        let mut seq = Vec::with_capacity(x.true_len * e);
        for &id in x.live() {
            seq.extend_from_slice(self.embed_row(id));
        }
        let positions = x.true_len - self.width + 1;
        let mut pooled = Pooled {
            value: vec![0.0; l.f],
            position: vec![0; l.f],
            active: vec![false; l.f],
        };
        for f in 0..l.f {
            let kernel = &self.weights[f * l.kernel_len()..(f + 1) * l.kernel_len()];
            let bias = self.weights[l.filter_bias() + f];
            let mut best = f64::NEG_INFINITY;
            let mut at = 0;
            for p in 0..positions {
                let window = &seq[p * e..p * e + l.kernel_len()];
                let a = bias + kernel.iter().zip(window).map(|(k, v)| k * v).sum::<f64>();
                if a > best {
                    best = a;
                    at = p;
                }
            }
            pooled.value[f] = best.max(0.0);
            pooled.position[f] = at;
            pooled.active[f] = best > 0.0;
        }
        Ok(pooled)
    }

    fn output(&self, pooled: &Pooled) -> f64 {
        let l = self.layout();
        let w = &self.weights;
        w[l.out_bias()]
            + w[l.out()..l.out_bias()]
                .iter()
                .zip(&pooled.value)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

impl SequenceNet for CnnModel {
    fn n_ids(&self) -> usize {
        self.n_ids
    }
    fn embed_dim(&self) -> usize {
        self.embed_dim
    }
    fn embedding(&self) -> &[f64] {
        &self.embedding
    }
    fn embedding_mut(&mut self) -> &mut [f64] {
        &mut self.embedding
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
    fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn logit(&self, x: &SequenceExample) -> Result<f64, ModelError> {
        let pooled = self.pool(x)?;
        Ok(self.output(&pooled))
    }

    /// Pads short sequences up to the kernel width with the padding row.
    fn prepare(&self, x: &SequenceExample) -> SequenceExample {
        if x.true_len == 0 || x.true_len >= self.width {
            return x.clone();
        }
        let pad = (self.n_ids - 1) as u32;
        let mut token_ids = x.live().to_vec();
        token_ids.resize(self.width.max(x.token_ids.len()), pad);
        SequenceExample {
            token_ids,
            true_len: self.width,
        }
    }

    fn loss_and_grad(&self, x: &SequenceExample, target: f64) -> Result<(f64, ExampleGrad), ModelError> {
        let pooled = self.pool(x)?;
        let l = self.layout();
        let e = l.e;
        let w = &self.weights;
        let z = self.output(&pooled);
        let loss = bce_from_logit(z, target);
        let dz = sigmoid(z) - target;

        let mut grad = vec![0.0; w.len()];
        grad[l.out_bias()] = dz;
        let mut dseq = vec![0.0; x.true_len * e];
        for f in 0..l.f {
            grad[l.out() + f] = dz * pooled.value[f];
            if !pooled.active[f] {
                continue;
            }
            let da = dz * w[l.out() + f];
            grad[l.filter_bias() + f] += da;
            let p = pooled.position[f];
            let kernel = f * l.kernel_len();
            for j in 0..l.w {
                let row = self.embed_row(x.token_ids[p + j]);
                for k in 0..e {
                    grad[kernel + j * e + k] += da * row[k];
                    dseq[(p + j) * e + k] += da * w[kernel + j * e + k];
                }
            }
        }
        let embedding = x
            .live()
            .iter()
            .enumerate()
            .map(|(t, &id)| (id, dseq[t * e..(t + 1) * e].to_vec()))
            .collect();
        Ok((
            loss,
            ExampleGrad {
                weights: grad,
                embedding,
            },
        ))
    }
}
