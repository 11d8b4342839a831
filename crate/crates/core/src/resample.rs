//! Class re-balancing: random under-sampling and SMOTE over-sampling.
//!
//! SMOTE visits minority rows round-robin as parents, picks one of the
//! parent's `k` nearest minority neighbours uniformly, and places the synthetic
//! row at `parent + gap * (neighbour - parent)` with `gap ~ U[0, 1)`. The random
//! draws are made sequentially before any parallel work so the output does not
//! depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, SparseRow};
use crate::label::{ClassCounts, Label};
use crate::rng::{self, Stream};

pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResampleError {
    #[error("re-sampling needs both classes, found only {0}")]
    SingleClass(Label),
    #[error("SMOTE needs at least 2 minority rows, found {0}")]
    MinorityTooSmall(usize),
    #[error("SMOTE needs k_neighbors >= 1")]
    ZeroNeighbors,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    Under,
    Smote,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::Under => "under",
            Strategy::Smote => "smote",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Strategy::None),
            "under" => Ok(Strategy::Under),
            "smote" => Ok(Strategy::Smote),
            other => Err(format!(
                "unknown re-sampling strategy `{other}` (expected none, under or smote)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub strategy: Strategy,
    pub k_neighbors: usize,
    pub seed: u64,
}

/// Where an output row came from, by index into the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowOrigin {
    Original(usize),
    Synthetic { parent: usize, neighbor: usize, gap: f64 },
}

impl RowOrigin {
    /// The input row whose text stands in for this row.
    pub fn source(&self) -> usize {
        match *self {
            RowOrigin::Original(i) => i,
            RowOrigin::Synthetic { parent, .. } => parent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub matrix: FeatureMatrix,
    pub labels: Vec<Label>,
    pub origins: Vec<RowOrigin>,
}

impl Resampled {
    pub fn counts(&self) -> ClassCounts {
        ClassCounts::from_labels(&self.labels)
    }
}

fn check(x: &FeatureMatrix, y: &[Label]) -> Result<ClassCounts, ResampleError> {
    if x.len() != y.len() {
        return Err(ResampleError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let counts = ClassCounts::from_labels(y);
    if counts.toxic == 0 {
        return Err(ResampleError::SingleClass(Label::NonToxic));
    }
    if counts.non_toxic == 0 {
        return Err(ResampleError::SingleClass(Label::Toxic));
    }
    Ok(counts)
}

fn identity(x: &FeatureMatrix, y: &[Label]) -> Resampled {
    Resampled {
        matrix: x.clone(),
        labels: y.to_vec(),
        origins: (0..y.len()).map(RowOrigin::Original).collect(),
    }
}

/// Drops random majority rows until both classes have the minority size.
/// Surviving rows keep their input order.
pub fn random_undersample(x: &FeatureMatrix, y: &[Label], seed: u64) -> Result<Resampled, ResampleError> {
    let counts = check(x, y)?;
    let majority = counts.majority();
    let target = counts.get(majority.other());
    let majority_rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == majority).collect();
    let mut rng = rng::stream(seed, Stream::Undersample);
    let mut keep = vec![true; y.len()];
    let chosen = rng::sample_sorted(&mut rng, majority_rows.len(), target);
    for &i in &majority_rows {
        keep[i] = false;
    }
    for c in chosen {
        keep[majority_rows[c]] = true;
    }
    let kept: Vec<usize> = (0..y.len()).filter(|&i| keep[i]).collect();
    Ok(Resampled {
        matrix: x.select(&kept),
        labels: kept.iter().map(|&i| y[i]).collect(),
        origins: kept.into_iter().map(RowOrigin::Original).collect(),
    })
}

/// Indices (into `pool`) of the `k` rows of `pool` nearest to `pool[i]`,
/// excluding `i`; distance ties go to the lower index.
fn nearest_in_pool(
    rows: &[&SparseRow],
    norms: &[f64],
    postings: &[Vec<(usize, f64)>],
    i: usize,
    k: usize,
) -> Vec<usize> {
    let mut dots = vec![0.0f64; rows.len()];
    for &(c, w) in rows[i].entries() {
        for &(j, v) in &postings[c as usize] {
            dots[j] += w * v;
        }
    }
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for j in 0..rows.len() {
        if j == i {
            continue;
        }
        let d = (norms[i] + norms[j] - 2.0 * dots[j]).max(0.0);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let at = best.partition_point(|&(bd, bj)| bd < d || (bd == d && bj < j));
        best.insert(at, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

/// The `k` nearest minority neighbours of each of the first `parents` minority
/// rows, as indices into `minority`.
pub fn minority_neighbors(x: &FeatureMatrix, minority: &[usize], k: usize, parents: usize) -> Vec<Vec<usize>> {
    let rows: Vec<&SparseRow> = minority.iter().map(|&i| &x.rows[i]).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm_sq()).collect();
    let width = rows.iter().map(|r| r.span()).max().unwrap_or(0).max(x.width);
    let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); width];
    for (j, r) in rows.iter().enumerate() {
        for &(c, w) in r.entries() {
            postings[c as usize].push((j, w));
        }
    }
    (0..parents.min(rows.len()))
        .into_par_iter()
        .map(|i| nearest_in_pool(&rows, &norms, &postings, i, k))
        .collect()
}

/// Appends synthetic minority rows until both classes are the same size.
pub fn smote_oversample(x: &FeatureMatrix, y: &[Label], k: usize, seed: u64) -> Result<Resampled, ResampleError> {
    let counts = check(x, y)?;
    if k == 0 {
        return Err(ResampleError::ZeroNeighbors);
    }
    let majority = counts.majority();
    let minority_label = majority.other();
    let quota = counts.get(majority) - counts.get(minority_label);
    if quota == 0 {
        return Ok(identity(x, y));
    }
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    if minority.len() < 2 {
        return Err(ResampleError::MinorityTooSmall(minority.len()));
    }
    let k_eff = if k > minority.len() - 1 {
        log::warn!(
            "SMOTE k={k} exceeds minority size - 1; clamping to {}",
            minority.len() - 1
        );
        minority.len() - 1
    } else {
        k
    };

    let mut rng = rng::stream(seed, Stream::Smote);
    let draws: Vec<(usize, f64)> = (0..quota)
        .map(|_| (rng.gen_range(0..k_eff), rng.gen::<f64>()))
        .collect();
    let neighbors = minority_neighbors(x, &minority, k_eff, quota);

    let synthetic: Vec<(SparseRow, RowOrigin)> = draws
        .par_iter()
        .enumerate()
        .map(|(j, &(pick, gap))| {
            let p = j % minority.len();
            let n = neighbors[p][pick];
            let (parent, neighbor) = (minority[p], minority[n]);
            let row = x.rows[parent].interpolate(&x.rows[neighbor], gap);
            (row, RowOrigin::Synthetic { parent, neighbor, gap })
        })
        .collect();

    let mut out = identity(x, y);
    for (row, origin) in synthetic {
        out.matrix.rows.push(row);
        out.labels.push(minority_label);
        out.origins.push(origin);
    }
    Ok(out)
}

pub fn apply(plan: &ResamplePlan, x: &FeatureMatrix, y: &[Label]) -> Result<Resampled, ResampleError> {
    match plan.strategy {
        Strategy::None => {
            if x.len() != y.len() {
                return Err(ResampleError::LengthMismatch {
                    rows: x.len(),
                    labels: y.len(),
                });
            }
            Ok(identity(x, y))
        }
        Strategy::Under => random_undersample(x, y, plan.seed),
        Strategy::Smote => smote_oversample(x, y, plan.k_neighbors, plan.seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        FeatureMatrix {
            rows: rows.iter().map(|r| SparseRow::from_dense(r)).collect(),
            width,
            kind: FeatureKind::Tfidf,
        }
    }

    fn labels(n_non: usize, n_tox: usize) -> Vec<Label> {
        let mut y = vec![Label::NonToxic; n_non];
        y.extend(vec![Label::Toxic; n_tox]);
        y
    }

    #[test]
    fn undersample_is_deterministic_and_order_preserving() {
        let x = matrix((0..7).map(|i| vec![i as f64 + 1.0]).collect());
        let y = labels(5, 2);
        let a = random_undersample(&x, &y, 9).unwrap();
        let b = random_undersample(&x, &y, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts(), ClassCounts { toxic: 2, non_toxic: 2 });
        let sources: Vec<usize> = a.origins.iter().map(RowOrigin::source).collect();
        assert!(sources.windows(2).all(|w| w[0] < w[1]));
        assert!(sources.ends_with(&[5, 6]));
        for (row, src) in a.matrix.rows.iter().zip(&sources) {
            assert_eq!(row, &x.rows[*src]);
        }
    }

    #[test]
    fn undersample_balanced_is_identity() {
        let x = matrix(vec![vec![1.0], vec![2.0]]);
        let y = labels(1, 1);
        let out = random_undersample(&x, &y, 1).unwrap();
        assert_eq!(out.matrix, x);
        assert_eq!(out.labels, y);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = matrix(vec![vec![1.0], vec![2.0]]);
        assert_eq!(
            random_undersample(&x, &labels(2, 0), 1),
            Err(ResampleError::SingleClass(Label::NonToxic))
        );
        assert!(matches!(
            smote_oversample(&x, &labels(0, 2), 5, 1),
            Err(ResampleError::SingleClass(_))
        ));
    }

    #[test]
    fn smote_needs_two_minority_rows() {
        let x = matrix(vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(
            smote_oversample(&x, &labels(2, 1), 5, 1),
            Err(ResampleError::MinorityTooSmall(1))
        );
    }

    #[test]
    fn smote_midpoint_of_two_points() {
        let parent = SparseRow::from_dense(&[0.0, 0.0]);
        let neighbor = SparseRow::from_dense(&[1.0, 1.0]);
        assert_eq!(parent.interpolate(&neighbor, 0.5), SparseRow::from_dense(&[0.5, 0.5]));
    }

    #[test]
    fn smote_balances_and_keeps_originals() {
        let x = matrix(vec![
            vec![5.0, 5.0],
            vec![6.0, 5.0],
            vec![5.0, 7.0],
            vec![6.0, 6.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let y = labels(4, 2);
        let out = smote_oversample(&x, &y, 1, 3).unwrap();
        assert_eq!(out.counts(), ClassCounts { toxic: 4, non_toxic: 4 });
        assert_eq!(&out.matrix.rows[..6], &x.rows[..]);
        for (row, origin) in out.matrix.rows[6..].iter().zip(&out.origins[6..]) {
            let RowOrigin::Synthetic { parent, neighbor, gap } = *origin else {
                panic!()
            };
            assert!(parent >= 4 && neighbor >= 4 && parent != neighbor);
            let (p, n) = (x.rows[parent].to_dense(2), x.rows[neighbor].to_dense(2));
            let v = row.to_dense(2);
            for d in 0..2 {
                assert!((v[d] - (p[d] + gap * (n[d] - p[d]))).abs() < 1e-12);
            }
        }
        assert_eq!(out, smote_oversample(&x, &y, 1, 3).unwrap());
    }

    #[test]
    fn smote_clamps_k() {
        let x = matrix(vec![vec![1.0], vec![2.0], vec![3.0], vec![10.0], vec![11.0]]);
        let y = labels(3, 2);
        let out = smote_oversample(&x, &y, 50, 1).unwrap();
        assert_eq!(out.counts().toxic, 3);
    }

    #[test]
    fn nearest_neighbours_break_ties_by_index() {
        let x = matrix(vec![vec![0.0], vec![1.0], vec![-1.0], vec![3.0]]);
        let nn = minority_neighbors(&x, &[0, 1, 2, 3], 2, 4);
        assert_eq!(nn[0], vec![1, 2]);
        assert_eq!(nn[1], vec![0, 2]);
        assert_eq!(nn[3], vec![1, 0]);
    }

    proptest! {
        #[test]
        fn classes_end_equal(n_non in 2usize..30, n_tox in 2usize..30, seed in any::<u64>()) {
            let rows: Vec<Vec<f64>> = (0..n_non + n_tox).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect();
            let x = matrix(rows);
            let y = labels(n_non, n_tox);
            let under = random_undersample(&x, &y, seed).unwrap();
            prop_assert_eq!(under.counts().toxic, under.counts().non_toxic);
            let over = smote_oversample(&x, &y, 5, seed).unwrap();
            prop_assert_eq!(over.counts().toxic, over.counts().non_toxic);
            prop_assert_eq!(over.counts().total(), 2 * n_non.max(n_tox));
        }
    }
}
