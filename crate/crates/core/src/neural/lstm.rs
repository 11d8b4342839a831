//! Single-layer LSTM with gates ordered input, forget, output, candidate.
//! The final hidden state feeds an affine output unit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bce_from_logit, check_ids, xavier, ExampleGrad, SequenceExample, SequenceNet};
use crate::models::{sigmoid, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub n_ids: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    /// `n_ids x embed_dim`, row-major.
    pub embedding: Vec<f64>,
    /// Input weights `4H x E`, recurrent weights `4H x H`, gate biases `4H`,
    /// output weights `H`, output bias.
    pub weights: Vec<f64>,
}

struct Layout {
    e: usize,
    h: usize,
}

impl Layout {
    fn input(&self) -> usize {
        0
    }
    fn recurrent(&self) -> usize {
        4 * self.h * self.e
    }
    fn gate_bias(&self) -> usize {
        self.recurrent() + 4 * self.h * self.h
    }
    fn out(&self) -> usize {
        self.gate_bias() + 4 * self.h
    }
    fn out_bias(&self) -> usize {
        self.out() + self.h
    }
    fn len(&self) -> usize {
        self.out_bias() + 1
    }
}

struct Step {
    id: u32,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `4H`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmModel {
    pub fn zeros(n_ids: usize, embed_dim: usize, hidden: usize) -> Self {
        let layout = Layout {
            e: embed_dim,
            h: hidden,
        };
        LstmModel {
            n_ids,
            embed_dim,
            hidden,
            embedding: vec![0.0; n_ids * embed_dim],
            weights: vec![0.0; layout.len()],
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init<R: Rng>(rng: &mut R, n_ids: usize, embed_dim: usize, hidden: usize) -> Self {
        let mut m = Self::zeros(n_ids, embed_dim, hidden);
        let l = m.layout();
        let (e, h) = (embed_dim, hidden);
        xavier(rng, &mut m.embedding, n_ids, e);
        xavier(rng, &mut m.weights[l.input()..l.recurrent()], e, 4 * h);
        xavier(rng, &mut m.weights[l.recurrent()..l.gate_bias()], h, 4 * h);
        xavier(rng, &mut m.weights[l.out()..l.out_bias()], h, 1);
        m
    }

    fn layout(&self) -> Layout {
        Layout {
            e: self.embed_dim,
            h: self.hidden,
        }
    }

    pub fn check_shapes(&self) -> Result<(), ModelError> {
        if self.embedding.len() != self.n_ids * self.embed_dim || self.weights.len() != self.layout().len() {
            return Err(ModelError::Invalid(
                "LSTM parameter arrays do not match its shape".into(),
            ));
        }
        Ok(())
    }

    fn run(&self, x: &SequenceExample) -> Result<(Vec<Step>, Vec<f64>), ModelError> {
        check_ids(x, self.n_ids)?;
        let l = self.layout();
        let (e, h) = (l.e, l.h);
        let w = &self.weights;
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut steps = Vec::with_capacity(x.true_len);
        for &id in x.live() {
            let xt = self.embed_row(id);
            let mut z = w[l.gate_bias()..l.gate_bias() + 4 * h].to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let wi = &w[l.input() + r * e..l.input() + (r + 1) * e];
                let wr = &w[l.recurrent() + r * h..l.recurrent() + (r + 1) * h];
                *zr += wi.iter().zip(xt).map(|(a, b)| a * b).sum::<f64>()
                    + wr.iter().zip(&hs).map(|(a, b)| a * b).sum::<f64>();
            }
            let gates: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(r, &v)| if r < 3 * h { sigmoid(v) } else { v.tanh() })
                .collect();
            let mut c = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut hn = vec![0.0; h];
            for j in 0..h {
                let (i, f, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                c[j] = f * cs[j] + i * g;
                tanh_c[j] = c[j].tanh();
                hn[j] = o * tanh_c[j];
            }
            steps.push(Step {
                id,
                h_prev: std::mem::replace(&mut hs, hn),
                c_prev: std::mem::replace(&mut cs, c),
                gates,
                tanh_c,
            });
        }
        Ok((steps, hs))
    }

    fn output(&self, h_final: &[f64]) -> f64 {
        let l = self.layout();
        let w = &self.weights;
        w[l.out_bias()]
            + w[l.out()..l.out_bias()]
                .iter()
                .zip(h_final)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

impl SequenceNet for LstmModel {
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
        let (_, h_final) = self.run(x)?;
        Ok(self.output(&h_final))
    }

    fn loss_and_grad(&self, x: &SequenceExample, target: f64) -> Result<(f64, ExampleGrad), ModelError> {
        let (steps, h_final) = self.run(x)?;
        let l = self.layout();
        let (e, h) = (l.e, l.h);
        let w = &self.weights;
        let z = self.output(&h_final);
        let loss = bce_from_logit(z, target);
        let dz = sigmoid(z) - target;

        let mut grad = vec![0.0; w.len()];
        grad[l.out_bias()] = dz;
        for j in 0..h {
            grad[l.out() + j] = dz * h_final[j];
        }
        let mut dh: Vec<f64> = w[l.out()..l.out_bias()].iter().map(|v| dz * v).collect();
        let mut dc = vec![0.0; h];
        let mut embedding = Vec::with_capacity(steps.len());
        let mut dpre = vec![0.0; 4 * h];
        for step in steps.iter().rev() {
            let g = &step.gates;
            for j in 0..h {
                let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = step.tanh_c[j];
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o * (1.0 - tc * tc);
                let d_i = dc[j] * cand;
                let d_g = dc[j] * i;
                let d_f = dc[j] * step.c_prev[j];
                dpre[j] = d_i * i * (1.0 - i);
                dpre[h + j] = d_f * f * (1.0 - f);
                dpre[2 * h + j] = d_o * o * (1.0 - o);
                dpre[3 * h + j] = d_g * (1.0 - cand * cand);
                dc[j] *= f;
            }
            let xt = self.embed_row(step.id);
            let mut dx = vec![0.0; e];
            let mut dh_prev = vec![0.0; h];
            for (r, &d) in dpre.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[l.gate_bias() + r] += d;
                let wi = l.input() + r * e;
                for k in 0..e {
                    grad[wi + k] += d * xt[k];
                    dx[k] += d * w[wi + k];
                }
                let wr = l.recurrent() + r * h;
                for k in 0..h {
                    grad[wr + k] += d * step.h_prev[k];
                    dh_prev[k] += d * w[wr + k];
                }
            }
            embedding.push((step.id, dx));
            dh = dh_prev;
        }
        embedding.reverse();
        Ok((
            loss,
            ExampleGrad {
                weights: grad,
                embedding,
            },
        ))
    }
}
