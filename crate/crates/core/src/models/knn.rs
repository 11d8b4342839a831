//! Brute-force Euclidean k-nearest-neighbours with uniform voting.
//!
//! Distances come from `|q|^2 + |x|^2 - 2 q.x` with the dot products
//! accumulated over an inverted index of the stored rows. Equal distances are
//! broken toward the lower stored index.

use serde::{Deserialize, Serialize};

use super::{require_both_classes, KnnConfig, ModelError, ProbabilisticClassifier, VotePair};
use crate::features::{FeatureMatrix, SparseRow};
use crate::label::Label;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "StoredKnn", into = "StoredKnn")]
pub struct KnnModel {
    rows: Vec<SparseRow>,
    labels: Vec<Label>,
    width: usize,
    config: KnnConfig,
    norms: Vec<f64>,
    postings: Vec<Vec<(u32, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct StoredKnn {
    rows: Vec<SparseRow>,
    labels: Vec<Label>,
    width: usize,
    config: KnnConfig,
}

impl From<StoredKnn> for KnnModel {
    fn from(s: StoredKnn) -> Self {
        KnnModel::index(s.rows, s.labels, s.width, s.config)
    }
}

impl From<KnnModel> for StoredKnn {
    fn from(m: KnnModel) -> Self {
        StoredKnn {
            rows: m.rows,
            labels: m.labels,
            width: m.width,
            config: m.config,
        }
    }
}

impl KnnModel {
    pub fn fit(x: &FeatureMatrix, y: &[Label], config: &KnnConfig) -> Result<Self, ModelError> {
        require_both_classes(y)?;
        if config.p != 2 {
            return Err(ModelError::Invalid(format!(
                "only p = 2 is supported, got {}",
                config.p
            )));
        }
        if config.n_neighbors == 0 || config.n_neighbors > x.len() {
            return Err(ModelError::Invalid(format!(
                "n_neighbors = {} with {} training rows",
                config.n_neighbors,
                x.len()
            )));
        }
        Ok(Self::index(x.rows.clone(), y.to_vec(), x.width, *config))
    }

    fn index(rows: Vec<SparseRow>, labels: Vec<Label>, width: usize, config: KnnConfig) -> Self {
        let width = rows.iter().map(|r| r.span()).max().unwrap_or(0).max(width);
        let mut postings = vec![Vec::new(); width];
        for (i, row) in rows.iter().enumerate() {
            for &(c, w) in row.entries() {
                postings[c as usize].push((i as u32, w));
            }
        }
        let norms = rows.iter().map(|r| r.norm_sq()).collect();
        KnnModel {
            rows,
            labels,
            width,
            config,
            norms,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn config(&self) -> &KnnConfig {
        &self.config
    }

    /// Indices of the `k` nearest stored rows, nearest first.
    pub fn neighbors(&self, query: &SparseRow) -> Result<Vec<usize>, ModelError> {
        if query.span() > self.width {
            return Err(ModelError::DimensionMismatch {
                expected: self.width,
                found: query.span(),
            });
        }
        let mut dot = vec![0.0; self.rows.len()];
        for &(c, w) in query.entries() {
            for &(i, v) in &self.postings[c as usize] {
                dot[i as usize] += w * v;
            }
        }
        let q = query.norm_sq();
        let mut scored: Vec<(f64, usize)> = dot
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (d, n))| ((q + n - 2.0 * d).max(0.0), i))
            .collect();
        let k = self.config.n_neighbors.min(scored.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k, by_distance);
            scored.truncate(k);
        }
        scored.sort_by(by_distance);
        Ok(scored.into_iter().map(|(_, i)| i).collect())
    }
}

pub fn knn_predict(model: &KnnModel, query: &SparseRow) -> Result<VotePair, ModelError> {
    let neighbors = model.neighbors(query)?;
    let toxic = neighbors.iter().filter(|&&i| model.labels[i].is_toxic()).count();
    Ok(VotePair::from_toxic(toxic as f64 / neighbors.len() as f64))
}

impl ProbabilisticClassifier<SparseRow> for KnnModel {
    fn predict_proba(&self, x: &SparseRow) -> Result<VotePair, ModelError> {
        knn_predict(self, x)
    }
}
