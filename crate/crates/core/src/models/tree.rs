//! CART trees over sparse rows, and the two tree ensembles built on them.
//!
//! Classification trees split on Gini gain and store the toxic fraction of
//! their training weight in each leaf. Boosting trees are regression trees on
//! the logistic-loss residuals with Newton leaf values.
//!
//! Split search gathers the nonzero entries of the node's rows, so a node
//! costs time proportional to its own nonzeros; the implicit zeros of a
//! feature form one extra value group. Equal gains go to the lower feature
//! column, then the lower threshold.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    require_both_classes, sigmoid, BoostingConfig, ForestConfig, ModelError, ProbabilisticClassifier, TreeConfig,
    VotePair,
};
use crate::features::{FeatureMatrix, SparseRow};
use crate::label::Label;
use crate::rng::{self, Stream};

const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// A grown tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    max_depth: usize,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<TreeNode>, max_depth: usize) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::Invalid("tree has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = node {
                let ok = |c: u32| (c as usize) > i && (c as usize) < nodes.len();
                if !ok(*left) || !ok(*right) {
                    return Err(ModelError::Invalid(format!("node {i} has an out-of-order child")));
                }
            }
        }
        Ok(DecisionTree { nodes, max_depth })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Leaf value reached by `x`.
    pub fn evaluate(&self, x: &SparseRow) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(*feature) <= *threshold { *left } else { *right } as usize,
            }
        }
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Class vote of a classification tree; an even leaf votes NonToxic.
    pub fn vote(&self, x: &SparseRow) -> Label {
        if self.evaluate(x) > 0.5 {
            Label::Toxic
        } else {
            Label::NonToxic
        }
    }
}

impl ProbabilisticClassifier<SparseRow> for DecisionTree {
    fn predict_proba(&self, x: &SparseRow) -> Result<VotePair, ModelError> {
        Ok(VotePair::from_toxic(self.evaluate(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Criterion {
    /// Row statistics `[non_toxic weight, toxic weight, _]`.
    Gini,
    /// Row statistics `[weight, residual, hessian]`.
    Newton,
}

type Stats = [f64; 3];

fn add(a: &mut Stats, b: &Stats, w: f64) {
    for k in 0..3 {
        a[k] += w * b[k];
    }
}

fn sub(a: &Stats, b: &Stats) -> Stats {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl Criterion {
    fn weight(self, s: &Stats) -> f64 {
        match self {
            Criterion::Gini => s[0] + s[1],
            Criterion::Newton => s[0],
        }
    }

    fn gini(s: &Stats) -> f64 {
        let w = s[0] + s[1];
        if w <= 0.0 {
            return 0.0;
        }
        let (a, b) = (s[0] / w, s[1] / w);
        1.0 - a * a - b * b
    }

    fn gain(self, parent: &Stats, left: &Stats, right: &Stats) -> f64 {
        match self {
            Criterion::Gini => {
                let w = self.weight(parent);
                Self::gini(parent)
                    - self.weight(left) / w * Self::gini(left)
                    - self.weight(right) / w * Self::gini(right)
            }
            Criterion::Newton => {
                left[1] * left[1] / left[0] + right[1] * right[1] / right[0] - parent[1] * parent[1] / parent[0]
            }
        }
    }

    /// Zero-gain splits are kept: they can unlock gains further down.
    fn accepts(gain: f64) -> bool {
        gain >= -GAIN_EPS
    }

    fn leaf(self, s: &Stats) -> f64 {
        match self {
            Criterion::Gini => s[1] / (s[0] + s[1]),
            Criterion::Newton => {
                if s[2] > 1e-12 {
                    s[1] / s[2]
                } else {
                    0.0
                }
            }
        }
    }

    fn pure(self, s: &Stats) -> bool {
        match self {
            Criterion::Gini => s[0] <= 0.0 || s[1] <= 0.0,
            Criterion::Newton => false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    gain: f64,
    feature: u32,
    threshold: f64,
}

impl Best {
    fn beats(&self, other: &Option<Best>) -> bool {
        match other {
            None => true,
            Some(o) => {
                if self.gain > o.gain + GAIN_EPS {
                    true
                } else if self.gain < o.gain - GAIN_EPS {
                    false
                } else {
                    (self.feature, self.threshold) < (o.feature, o.threshold)
                }
            }
        }
    }
}

struct Grower<'a> {
    rows: &'a [SparseRow],
    stats: &'a [Stats],
    criterion: Criterion,
    max_depth: usize,
    /// Candidate features per node; `None` searches all of them.
    max_features: Option<usize>,
    rng: Option<ChaCha8Rng>,
    pool: Vec<u32>,
    nodes: Vec<TreeNode>,
}

/// One sample of a node: row index and its multiplicity.
type Sample = (u32, f64);

impl<'a> Grower<'a> {
    fn total(&self, samples: &[Sample]) -> Stats {
        let mut s = [0.0; 3];
        for &(r, w) in samples {
            add(&mut s, &self.stats[r as usize], w);
        }
        s
    }

    fn grow(&mut self, samples: Vec<Sample>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let total = self.total(&samples);
        self.nodes.push(TreeNode::Leaf {
            value: self.criterion.leaf(&total),
        });
        let weight: f64 = samples.iter().map(|s| s.1).sum();
        if depth >= self.max_depth || weight < 2.0 || self.criterion.pure(&total) {
            return id;
        }
        let Some(best) = self.best_split(&samples, &total) else {
            return id;
        };
        let (left, right): (Vec<Sample>, Vec<Sample>) = samples
            .into_iter()
            .partition(|&(r, _)| self.rows[r as usize].get(best.feature) <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id as usize] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&mut self, samples: &[Sample], total: &Stats) -> Option<Best> {
        // (feature, value, sample) for every nonzero in the node
        let mut entries: Vec<(u32, f64, u32)> = Vec::new();
        for (s, &(r, _)) in samples.iter().enumerate() {
            for &(c, v) in self.rows[r as usize].entries() {
                entries.push((c, v, s as u32));
            }
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut spans: Vec<(u32, usize, usize)> = Vec::new();
        let mut start = 0;
        while start < entries.len() {
            let f = entries[start].0;
            let mut end = start;
            while end < entries.len() && entries[end].0 == f {
                end += 1;
            }
            spans.push((f, start, end));
            start = end;
        }

        let mut rng = self.rng.take();
        let mut pool = std::mem::take(&mut self.pool);
        let mut best: Option<Best> = None;
        let mut evaluate = |span: &(u32, usize, usize)| -> bool {
            match self.best_on_feature(span.0, &entries[span.1..span.2], samples, total) {
                Some(c) => {
                    if c.beats(&best) {
                        best = Some(c);
                    }
                    true
                }
                None => false,
            }
        };
        match (self.max_features, rng.as_mut()) {
            (Some(max_features), Some(rng)) => {
                // random feature order by a lazy Fisher-Yates over the whole
                // pool; keep drawing past max_features until one is splittable
                let width = pool.len();
                let mut found = false;
                for t in 0..width {
                    if t >= max_features && found {
                        break;
                    }
                    let j = rng.gen_range(t..width);
                    pool.swap(t, j);
                    if let Ok(i) = spans.binary_search_by_key(&pool[t], |s| s.0) {
                        found |= evaluate(&spans[i]);
                    }
                }
            }
            _ => {
                for span in &spans {
                    evaluate(span);
                }
            }
        }
        self.rng = rng;
        self.pool = pool;
        best.filter(|b| Criterion::accepts(b.gain))
    }

    /// Best threshold on one feature; `None` when the feature is constant in
    /// the node.
    fn best_on_feature(
        &self,
        feature: u32,
        entries: &[(u32, f64, u32)],
        samples: &[Sample],
        total: &Stats,
    ) -> Option<Best> {
        // value groups in increasing order, zeros included
        let mut groups: Vec<(f64, Stats)> = Vec::new();
        let mut nonzero = [0.0; 3];
        for &(_, v, s) in entries {
            let (r, w) = samples[s as usize];
            match groups.last_mut() {
                Some((last, acc)) if *last == v => add(acc, &self.stats[r as usize], w),
                _ => {
                    let mut acc = [0.0; 3];
                    add(&mut acc, &self.stats[r as usize], w);
                    groups.push((v, acc));
                }
            }
            add(&mut nonzero, &self.stats[r as usize], w);
        }
        if entries.len() < samples.len() {
            let zeros = sub(total, &nonzero);
            let at = groups.partition_point(|g| g.0 < 0.0);
            groups.insert(at, (0.0, zeros));
        }
        if groups.len() < 2 {
            return None;
        }
        let mut left = [0.0; 3];
        let mut best: Option<Best> = None;
        for i in 0..groups.len() - 1 {
            add(&mut left, &groups[i].1, 1.0);
            let right = sub(total, &left);
            let candidate = Best {
                gain: self.criterion.gain(total, &left, &right),
                feature,
                threshold: groups[i].0 + (groups[i + 1].0 - groups[i].0) / 2.0,
            };
            if candidate.beats(&best) {
                best = Some(candidate);
            }
        }
        best
    }
}

fn grow_tree(
    rows: &[SparseRow],
    stats: &[Stats],
    samples: Vec<Sample>,
    width: usize,
    criterion: Criterion,
    max_depth: usize,
    random_features: Option<(usize, ChaCha8Rng)>,
) -> DecisionTree {
    let (max_features, rng) = match random_features {
        Some((m, rng)) => (Some(m), Some(rng)),
        None => (None, None),
    };
    let mut grower = Grower {
        rows,
        stats,
        criterion,
        max_depth,
        max_features,
        rng,
        pool: (0..width as u32).collect(),
        nodes: Vec::new(),
    };
    grower.grow(samples, 0);
    DecisionTree {
        nodes: grower.nodes,
        max_depth,
    }
}

fn class_stats(y: &[Label]) -> Vec<Stats> {
    y.iter()
        .map(|l| if l.is_toxic() { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] })
        .collect()
}

fn matrix_width(x: &FeatureMatrix) -> usize {
    x.rows.iter().map(|r| r.span()).max().unwrap_or(0).max(x.width)
}

fn check_training(x: &FeatureMatrix, y: &[Label]) -> Result<(), ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::Invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    require_both_classes(y)
}

/// Features considered per node by the random forest: `max(1, floor(sqrt(d)))`.
pub fn sqrt_features(width: usize) -> usize {
    ((width as f64).sqrt().floor() as usize).max(1)
}

/// Single CART tree over every feature of the full training set.
pub fn fit_decision_tree(x: &FeatureMatrix, y: &[Label], config: &TreeConfig) -> Result<DecisionTree, ModelError> {
    check_training(x, y)?;
    let stats = class_stats(y);
    let samples = (0..x.len() as u32).map(|r| (r, 1.0)).collect();
    Ok(grow_tree(
        &x.rows,
        &stats,
        samples,
        matrix_width(x),
        Criterion::Gini,
        config.max_depth,
        None,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    RandomForest,
    GradientBoosting,
}

/// Bagged classification trees combined by majority vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_estimators: usize,
}

/// Boosted regression trees on the log-odds scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub trees: Vec<DecisionTree>,
    /// Initial log-odds of the toxic class.
    pub prior: f64,
    pub learning_rate: f64,
}

impl BoostedModel {
    pub fn score(&self, x: &SparseRow) -> f64 {
        self.prior + self.learning_rate * self.trees.iter().map(|t| t.evaluate(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeEnsemble {
    RandomForest(ForestModel),
    GradientBoosting(BoostedModel),
}

/// Fraction of trees voting Toxic. Exact ties predict NonToxic through
/// [`VotePair::argmax`].
pub fn forest_vote(trees: &[DecisionTree], x: &SparseRow) -> VotePair {
    let toxic = trees.iter().filter(|t| t.vote(x).is_toxic()).count();
    VotePair::from_toxic(toxic as f64 / trees.len() as f64)
}

pub fn fit_random_forest(
    x: &FeatureMatrix,
    y: &[Label],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, ModelError> {
    check_training(x, y)?;
    if config.n_estimators == 0 || config.max_depth == 0 {
        return Err(ModelError::Invalid("forest needs at least one tree of depth 1".into()));
    }
    let stats = class_stats(y);
    let width = matrix_width(x);
    let n = x.len();
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, Stream::Forest, t as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1;
            }
            let samples = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(r, &c)| (r as u32, c as f64))
                .collect();
            grow_tree(
                &x.rows,
                &stats,
                samples,
                width,
                Criterion::Gini,
                config.max_depth,
                Some((sqrt_features(width), rng)),
            )
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_estimators: config.n_estimators,
    })
}

pub fn fit_gradient_boosting(
    x: &FeatureMatrix,
    y: &[Label],
    config: &BoostingConfig,
) -> Result<BoostedModel, ModelError> {
    check_training(x, y)?;
    if config.n_estimators == 0 || config.max_depth == 0 || !(config.learning_rate > 0.0) {
        return Err(ModelError::Invalid(
            "boosting needs trees, depth and a positive learning rate".into(),
        ));
    }
    let width = matrix_width(x);
    let positive = y.iter().filter(|l| l.is_toxic()).count() as f64 / y.len() as f64;
    let prior = (positive / (1.0 - positive)).ln();
    let mut scores = vec![prior; x.len()];
    let mut trees = Vec::with_capacity(config.n_estimators);
    let samples: Vec<Sample> = (0..x.len() as u32).map(|r| (r, 1.0)).collect();
    for _ in 0..config.n_estimators {
        let stats: Vec<Stats> = scores
            .iter()
            .zip(y)
            .map(|(&f, l)| {
                let p = sigmoid(f);
                [1.0, l.target() - p, p * (1.0 - p)]
            })
            .collect();
        let tree = grow_tree(
            &x.rows,
            &stats,
            samples.clone(),
            width,
            Criterion::Newton,
            config.max_depth,
            None,
        );
        scores
            .par_iter_mut()
            .zip(&x.rows)
            .for_each(|(f, row)| *f += config.learning_rate * tree.evaluate(row));
        trees.push(tree);
    }
    Ok(BoostedModel {
        trees,
        prior,
        learning_rate: config.learning_rate,
    })
}

/// `fit_forest` for either family. Boosting is deterministic and ignores
/// `seed`.
pub fn fit_forest(
    kind: ForestKind,
    x: &FeatureMatrix,
    y: &[Label],
    forest: &ForestConfig,
    boosting: &BoostingConfig,
    seed: u64,
) -> Result<TreeEnsemble, ModelError> {
    Ok(match kind {
        ForestKind::RandomForest => TreeEnsemble::RandomForest(fit_random_forest(x, y, forest, seed)?),
        ForestKind::GradientBoosting => TreeEnsemble::GradientBoosting(fit_gradient_boosting(x, y, boosting)?),
    })
}

impl ProbabilisticClassifier<SparseRow> for ForestModel {
    fn predict_proba(&self, x: &SparseRow) -> Result<VotePair, ModelError> {
        if self.trees.is_empty() {
            return Err(ModelError::Invalid("forest has no trees".into()));
        }
        Ok(forest_vote(&self.trees, x))
    }
}

impl ProbabilisticClassifier<SparseRow> for BoostedModel {
    fn predict_proba(&self, x: &SparseRow) -> Result<VotePair, ModelError> {
        Ok(VotePair::from_toxic(sigmoid(self.score(x))))
    }
}

impl ProbabilisticClassifier<SparseRow> for TreeEnsemble {
    fn predict_proba(&self, x: &SparseRow) -> Result<VotePair, ModelError> {
        match self {
            TreeEnsemble::RandomForest(m) => m.predict_proba(x),
            TreeEnsemble::GradientBoosting(m) => m.predict_proba(x),
        }
    }
}
