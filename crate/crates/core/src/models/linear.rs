//! Logistic regression and a linear SVM, both trained by full-batch gradient
//! descent on `C * sum(loss) + |w|^2 / 2`, divided through by `C n`:
//!
//! - logistic: mean log-loss + `|w|^2 / (2 C n)`
//! - SVM: mean hinge loss over ±1 targets + `|w|^2 / (2 C n)`
//!
//! so `C` has its usual liblinear meaning. The bias is never penalized. The SVM reports `sigmoid(margin)` as its
//! toxic probability.

use serde::{Deserialize, Serialize};

use super::{require_both_classes, sigmoid, LinearConfig, ModelError, ProbabilisticClassifier, VotePair};
use crate::features::{FeatureMatrix, SparseRow};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logistic,
    Svm,
}

/// Map from decision value to toxic probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Sigmoid,
    MarginSigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub link: Link,
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, width: usize) -> Self {
        LinearModel {
            kind,
            weights: vec![0.0; width],
            bias: 0.0,
            link: match kind {
                LinearKind::Logistic => Link::Sigmoid,
                LinearKind::Svm => Link::MarginSigmoid,
            },
        }
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }
}

/// `w . x + b`.
pub fn linear_decision(model: &LinearModel, x: &SparseRow) -> Result<f64, ModelError> {
    if x.span() > model.width() {
        return Err(ModelError::DimensionMismatch {
            expected: model.width(),
            found: x.span(),
        });
    }
    Ok(x.dot_dense(&model.weights) + model.bias)
}

impl ProbabilisticClassifier<SparseRow> for LinearModel {
    fn predict_proba(&self, x: &SparseRow) -> Result<VotePair, ModelError> {
        // both links are the logistic function of the decision value
        let z = linear_decision(self, x)?;
        Ok(VotePair::from_toxic(sigmoid(z)))
    }
}

fn penalty_scale(c: f64, n: usize) -> f64 {
    1.0 / (2.0 * c * n as f64)
}

/// Logistic loss `-log sigmoid(s z)` for signed target `s`, computed stably.
fn log_loss(signed_margin: f64) -> f64 {
    if signed_margin > 0.0 {
        (-signed_margin).exp().ln_1p()
    } else {
        -signed_margin + signed_margin.exp().ln_1p()
    }
}

fn signed(label: Label) -> f64 {
    if label.is_toxic() {
        1.0
    } else {
        -1.0
    }
}

/// Regularized training objective at `model`.
pub fn linear_loss(model: &LinearModel, x: &FeatureMatrix, y: &[Label], c: f64) -> f64 {
    let n = x.rows.len() as f64;
    let data: f64 = x
        .rows
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let m = signed(label) * (row.dot_dense(&model.weights) + model.bias);
            match model.kind {
                LinearKind::Logistic => log_loss(m),
                LinearKind::Svm => (1.0 - m).max(0.0),
            }
        })
        .sum::<f64>()
        / n;
    let norm: f64 = model.weights.iter().map(|w| w * w).sum();
    data + penalty_scale(c, x.rows.len()) * norm
}

/// Gradient of [`linear_loss`] as `(d_weights, d_bias)`. For the hinge loss
/// this is the subgradient taking 0 at the kink.
pub fn linear_gradient(model: &LinearModel, x: &FeatureMatrix, y: &[Label], c: f64) -> (Vec<f64>, f64) {
    let n = x.rows.len() as f64;
    let scale = 2.0 * penalty_scale(c, x.rows.len());
    let mut grad: Vec<f64> = model.weights.iter().map(|w| scale * w).collect();
    let mut grad_bias = 0.0;
    for (row, &label) in x.rows.iter().zip(y) {
        let z = row.dot_dense(&model.weights) + model.bias;
        let coef = match model.kind {
            LinearKind::Logistic => sigmoid(z) - label.target(),
            LinearKind::Svm => {
                let s = signed(label);
                if s * z < 1.0 {
                    -s
                } else {
                    0.0
                }
            }
        } / n;
        if coef != 0.0 {
            for &(col, v) in row.entries() {
                grad[col as usize] += coef * v;
            }
            grad_bias += coef;
        }
    }
    (grad, grad_bias)
}

pub fn fit_linear(
    kind: LinearKind,
    x: &FeatureMatrix,
    y: &[Label],
    config: &LinearConfig,
) -> Result<LinearModel, ModelError> {
    require_both_classes(y)?;
    if !(config.c > 0.0) {
        return Err(ModelError::Invalid(format!("C must be positive, got {}", config.c)));
    }
    let mut model = LinearModel::zeros(kind, x.width);
    for _ in 0..config.max_iter {
        let (grad, grad_bias) = linear_gradient(&model, x, y, config.c);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        model.bias -= config.learning_rate * grad_bias;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use Label::*;

    fn toy() -> (FeatureMatrix, Vec<Label>) {
        let dense = [
            [1.0, 0.0, 0.5, 0.0, 2.0],
            [0.0, 1.5, 0.0, 1.0, 0.0],
            [0.2, 0.0, 0.0, 0.0, 1.0],
            [0.0, 2.0, 1.0, 0.0, 0.0],
            [1.2, 0.0, 0.0, 0.3, 1.4],
            [0.0, 0.7, 0.2, 1.1, 0.0],
        ];
        let rows = dense.iter().map(|d| SparseRow::from_dense(d)).collect();
        let x = FeatureMatrix {
            rows,
            width: 5,
            kind: FeatureKind::Tfidf,
        };
        (x, vec![Toxic, NonToxic, Toxic, NonToxic, Toxic, NonToxic])
    }

    fn finite_difference(model: &LinearModel, x: &FeatureMatrix, y: &[Label], c: f64) -> (Vec<f64>, f64) {
        let h = 1e-6;
        let mut grad = Vec::new();
        for j in 0..model.width() {
            let mut plus = model.clone();
            plus.weights[j] += h;
            let mut minus = model.clone();
            minus.weights[j] -= h;
            grad.push((linear_loss(&plus, x, y, c) - linear_loss(&minus, x, y, c)) / (2.0 * h));
        }
        let mut plus = model.clone();
        plus.bias += h;
        let mut minus = model.clone();
        minus.bias -= h;
        let gb = (linear_loss(&plus, x, y, c) - linear_loss(&minus, x, y, c)) / (2.0 * h);
        (grad, gb)
    }

    /// Relative error, absolute below 1e-3 where finite-difference roundoff
    /// dominates.
    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn logistic_gradient_matches_finite_difference() {
        let (x, y) = toy();
        let mut model = LinearModel::zeros(LinearKind::Logistic, 5);
        for point in 0..2 {
            let (g, gb) = linear_gradient(&model, &x, &y, 1.0);
            let (fd, fdb) = finite_difference(&model, &x, &y, 1.0);
            for (a, b) in g.iter().zip(&fd) {
                assert!(rel_err(*a, *b) < 1e-6, "point {point}: {a} vs {b}");
            }
            assert!(rel_err(gb, fdb) < 1e-6);
            model.weights = vec![0.3, -0.2, 0.1, 0.05, -0.4];
            model.bias = 0.2;
        }
    }

    #[test]
    fn svm_gradient_matches_finite_difference_off_the_kink() {
        let (x, y) = toy();
        let mut model = LinearModel::zeros(LinearKind::Svm, 5);
        model.weights = vec![0.3, -0.2, 0.1, 0.05, -0.4];
        model.bias = 0.17;
        let (g, gb) = linear_gradient(&model, &x, &y, 2.0);
        let (fd, fdb) = finite_difference(&model, &x, &y, 2.0);
        for (a, b) in g.iter().zip(&fd) {
            assert!(rel_err(*a, *b) < 1e-6, "{a} vs {b}");
        }
        assert!(rel_err(gb, fdb) < 1e-6, "{gb} vs {fdb}");
    }

    #[test]
    fn training_separates_toy_data_and_lowers_loss() {
        let (x, y) = toy();
        for (kind, config) in [
            (LinearKind::Logistic, LinearConfig::logistic()),
            (LinearKind::Svm, LinearConfig::svm()),
        ] {
            let start = linear_loss(&LinearModel::zeros(kind, 5), &x, &y, config.c);
            let model = fit_linear(kind, &x, &y, &config).unwrap();
            assert!(linear_loss(&model, &x, &y, config.c) < start);
            for (row, label) in x.rows.iter().zip(&y) {
                assert_eq!(model.predict(row).unwrap(), *label, "{kind:?}");
            }
        }
    }

    #[test]
    fn logistic_loss_is_monotone_under_gradient_descent() {
        let (x, y) = toy();
        let config = LinearConfig::logistic();
        let mut model = LinearModel::zeros(LinearKind::Logistic, 5);
        let mut previous = linear_loss(&model, &x, &y, config.c);
        for _ in 0..50 {
            let (g, gb) = linear_gradient(&model, &x, &y, config.c);
            for (w, d) in model.weights.iter_mut().zip(&g) {
                *w -= config.learning_rate * d;
            }
            model.bias -= config.learning_rate * gb;
            let loss = linear_loss(&model, &x, &y, config.c);
            assert!(loss <= previous + 1e-12);
            previous = loss;
        }
    }

    #[test]
    fn rejects_single_class_and_wide_inputs() {
        let (x, _) = toy();
        let y = vec![Toxic; 6];
        assert_eq!(
            fit_linear(LinearKind::Logistic, &x, &y, &LinearConfig::logistic()),
            Err(ModelError::SingleClassTraining)
        );
        let model = LinearModel::zeros(LinearKind::Svm, 2);
        let wide = SparseRow::from_pairs(vec![(4, 1.0)]);
        assert_eq!(
            model.predict_proba(&wide),
            Err(ModelError::DimensionMismatch { expected: 2, found: 5 })
        );
    }

    #[test]
    fn svm_probability_is_sigmoid_of_margin() {
        let mut model = LinearModel::zeros(LinearKind::Svm, 2);
        model.weights = vec![1.0, -2.0];
        model.bias = 0.5;
        let row = SparseRow::from_pairs(vec![(0, 1.0), (1, 1.0)]);
        let p = model.predict_proba(&row).unwrap();
        assert!((p.toxic_prob - sigmoid(-0.5)).abs() < 1e-15);
        assert_eq!(p.toxic_prob + p.nontoxic_prob, 1.0);
    }

    #[test]
    fn closed_form_probabilities() {
        let mut model = LinearModel::zeros(LinearKind::Logistic, 3);
        let row = SparseRow::from_pairs(vec![(0, 2.0), (2, -1.0)]);
        assert_eq!(model.predict_proba(&row).unwrap().toxic_prob, 0.5);
        model.bias = 3f64.ln();
        assert!((model.predict_proba(&row).unwrap().toxic_prob - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let (x, y) = toy();
        let config = LinearConfig {
            learning_rate: 0.0,
            ..LinearConfig::logistic()
        };
        let model = fit_linear(LinearKind::Logistic, &x, &y, &config).unwrap();
        assert_eq!(model, LinearModel::zeros(LinearKind::Logistic, 5));
    }

    /// Brute-force search for a separating line `a x1 + b x2 + c` over a grid.
    fn separable(points: &[[f64; 2]], y: &[Label]) -> bool {
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 / 4.0).collect();
        grid.iter().any(|&a| {
            grid.iter().any(|&b| {
                grid.iter().any(|&c| {
                    points
                        .iter()
                        .zip(y)
                        .all(|(p, l)| (a * p[0] + b * p[1] + c > 0.0) == l.is_toxic())
                })
            })
        })
    }

    #[test]
    fn separable_sets_are_fit_exactly() {
        let one_d = FeatureMatrix {
            rows: vec![SparseRow::from_dense(&[-1.0]), SparseRow::from_dense(&[1.0])],
            width: 1,
            kind: FeatureKind::Tfidf,
        };
        let y = [NonToxic, Toxic];
        for kind in [LinearKind::Logistic, LinearKind::Svm] {
            let config = if kind == LinearKind::Svm {
                LinearConfig::svm()
            } else {
                LinearConfig::logistic()
            };
            let model = fit_linear(kind, &one_d, &y, &config).unwrap();
            for (row, label) in one_d.rows.iter().zip(&y) {
                assert_eq!(model.predict(row).unwrap(), *label);
            }
        }

        let points = [[0.0, 1.0], [1.0, 2.0], [2.0, 0.0], [3.0, 1.0]];
        let y = [Toxic, Toxic, NonToxic, NonToxic];
        assert!(separable(&points, &y));
        let x = FeatureMatrix {
            rows: points.iter().map(|p| SparseRow::from_dense(p)).collect(),
            width: 2,
            kind: FeatureKind::Tfidf,
        };
        let model = fit_linear(LinearKind::Logistic, &x, &y, &LinearConfig::logistic()).unwrap();
        for (row, label) in x.rows.iter().zip(&y) {
            let p = model.predict_proba(row).unwrap().toxic_prob;
            assert_eq!(p > 0.5, label.is_toxic(), "p = {p}");
        }
    }
}
