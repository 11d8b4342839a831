//! Train/test splitting, confusion-matrix metrics, the Welch t-test and
//! evaluation reports.
//!
//! The t-test uses the standard convention: the null hypothesis is equal
//! means, rejected when the two-sided p-value falls below `alpha`.

use serde::{Deserialize, Serialize};

use crate::label::{ClassCounts, Label};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("need at least 4 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("split ratio {0} leaves an empty side")]
    BadRatio(f64),
    #[error("{predictions} predictions for {truth} labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("no examples to evaluate")]
    EmptyEvaluation,
    #[error("each t-test sample needs at least 2 values, got {0}")]
    SampleTooSmall(usize),
}

pub const DEFAULT_SPLIT_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded uniform shuffle of `0..n`; the first `floor(ratio * n)` indices
/// train, the rest test. Not stratified.
pub fn train_test_split(n: usize, ratio: f64, seed: u64) -> Result<Split, EvalError> {
    if n < 4 {
        return Err(EvalError::TooFewRows(n));
    }
    let cut = (ratio * n as f64).floor() as usize;
    if !(ratio > 0.0 && ratio < 1.0) || cut == 0 || cut == n {
        return Err(EvalError::BadRatio(ratio));
    }
    let mut rng = rng::stream(seed, Stream::Split);
    let mut order = rng::permutation(&mut rng, n);
    let test = order.split_off(cut);
    Ok(Split { train: order, test })
}

/// Counts with `Toxic` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Toxic, Label::Toxic) => self.tp += 1,
            (Label::NonToxic, Label::NonToxic) => self.tn += 1,
            (Label::Toxic, Label::NonToxic) => self.fp += 1,
            (Label::NonToxic, Label::Toxic) => self.fn_ += 1,
        }
    }
}

pub fn confusion(predicted: &[Label], truth: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predicted.len(),
            truth: truth.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        cm.record(p, t);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Correct predictions.
    pub cp: usize,
    /// Wrong predictions.
    pub wp: usize,
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Zero denominators give zero precision, recall or F1.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let precision = ratio_or_zero(tp, tp + fp);
    let recall = ratio_or_zero(tp, tp + fn_);
    Ok(MetricSet {
        accuracy: (tp + tn) / total as f64,
        precision,
        recall,
        f1: ratio_or_zero(2.0 * precision * recall, precision + recall),
        cp: cm.tp + cm.tn,
        wp: cm.fp + cm.fn_,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

fn mean_and_variance(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test with a two-sided p-value.
///
/// When both samples have zero variance the statistic is 0 with p = 1 for
/// equal means, and infinite with p = 0 otherwise; the degrees of freedom
/// fall back to `n_a + n_b - 2`.
pub fn welch_ttest(sample_a: &[f64], sample_b: &[f64], alpha: f64) -> Result<TTestResult, EvalError> {
    for s in [sample_a, sample_b] {
        if s.len() < 2 {
            return Err(EvalError::SampleTooSmall(s.len()));
        }
    }
    let (ma, va) = mean_and_variance(sample_a);
    let (mb, vb) = mean_and_variance(sample_b);
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let (t, df, p) = if se2 == 0.0 {
        let df = na + nb - 2.0;
        if ma == mb {
            (0.0, df, 1.0)
        } else {
            (f64::INFINITY.copysign(ma - mb), df, 0.0)
        }
    } else {
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
        (t, df, two_sided_p(t, df))
    };
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        alpha,
        significant: p < alpha,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Accuracy samples for the t-test: `runs` evaluations with seeds
/// `base_seed..base_seed + runs`.
pub fn seed_sequence(base_seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|i| base_seed.wrapping_add(i)).collect()
}

/// One model's result on the held-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fingerprint: String,
    pub seed: u64,
    pub resample: String,
    pub features: String,
    pub model: String,
    /// Class totals of the rows the model was trained and tested on.
    pub train_counts: ClassCounts,
    pub test_counts: ClassCounts,
    pub cm: ConfusionMatrix,
    pub metrics: MetricSet,
    pub config: serde_json::Value,
}

/// Markdown table with one row per report.
pub fn markdown_table(reports: &[EvaluationReport]) -> String {
    let mut out = String::from("| Classifier | Features | Resample | Accuracy | Precision | Recall | F1 |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for r in reports {
        out.push_str(&format!(
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
            r.model, r.features, r.resample, r.metrics.accuracy, r.metrics.precision, r.metrics.recall, r.metrics.f1
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::*;

    #[test]
    fn split_sizes() {
        let s = train_test_split(85_294, DEFAULT_SPLIT_RATIO, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (63_970, 21_324));
        let s = train_test_split(4, DEFAULT_SPLIT_RATIO, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (3, 1));
        assert_eq!(train_test_split(3, 0.75, 1), Err(EvalError::TooFewRows(3)));
        assert_eq!(train_test_split(10, 1.0, 1), Err(EvalError::BadRatio(1.0)));
        assert_eq!(train_test_split(100, 0.75, 9), train_test_split(100, 0.75, 9));
        assert_ne!(train_test_split(100, 0.75, 9), train_test_split(100, 0.75, 10));
    }

    #[test]
    fn hand_tallied_confusion() {
        let pred = [
            Toxic, Toxic, NonToxic, NonToxic, Toxic, NonToxic, Toxic, NonToxic, NonToxic, Toxic,
        ];
        let truth = [
            Toxic, NonToxic, NonToxic, Toxic, Toxic, NonToxic, NonToxic, NonToxic, Toxic, Toxic,
        ];
        // pairs: TP, FP, TN, FN, TP, TN, FP, TN, FN, TP
        let cm = confusion(&pred, &truth).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 3,
                tn: 3,
                fp: 2,
                fn_: 2
            }
        );

        let cm = confusion(&truth, &truth).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let cm = confusion(&[Toxic; 10], &truth).unwrap();
        assert_eq!((cm.tn, cm.fn_), (0, 0));
        assert!(confusion(&pred[..3], &truth).is_err());
    }

    #[test]
    fn closed_form_metrics() {
        let m = metrics(&ConfusionMatrix {
            tp: 1,
            tn: 1,
            fp: 0,
            fn_: 0,
        })
        .unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let m = metrics(&ConfusionMatrix {
            tp: 1,
            tn: 1,
            fp: 1,
            fn_: 1,
        })
        .unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));
        let m = metrics(&ConfusionMatrix {
            tp: 8,
            tn: 6,
            fp: 2,
            fn_: 4,
        })
        .unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-4);
        assert!((m.precision - 0.8).abs() < 1e-4);
        assert!((m.recall - 0.6667).abs() < 1e-4);
        assert!((m.f1 - 0.7273).abs() < 1e-4);
        assert_eq!((m.cp, m.wp), (14, 6));

        let m = metrics(&ConfusionMatrix {
            tp: 0,
            tn: 5,
            fp: 0,
            fn_: 0,
        })
        .unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(metrics(&ConfusionMatrix::default()), Err(EvalError::EmptyEvaluation));
    }

    /// Student-t density integrated by composite Simpson's rule on the tail.
    fn tail_by_integration(t: f64, df: f64) -> f64 {
        let ln_c = statrs::function::gamma::ln_gamma((df + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let density = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        // P(|T| >= t) = 1 - 2 * integral_0^t density
        let steps = 20_000;
        let h = t.abs() / steps as f64;
        let mut sum = density(0.0) + density(t.abs());
        for i in 1..steps {
            let x = i as f64 * h;
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * density(x);
        }
        1.0 - 2.0 * sum * h / 3.0
    }

    #[test]
    fn welch_against_hand_evaluation() {
        let a = [0.90, 0.91, 0.92];
        let b = [0.80, 0.81, 0.82];
        // variances 1e-4 each; se = sqrt(2e-4 / 3); df = 4
        let se = (2e-4f64 / 3.0).sqrt();
        let r = welch_ttest(&a, &b, 0.05).unwrap();
        assert!((r.t_statistic - 0.1 / se).abs() < 1e-9);
        assert!((r.degrees_of_freedom - 4.0).abs() < 1e-9);
        let oracle = tail_by_integration(r.t_statistic, 4.0);
        assert!((r.p_value - oracle).abs() < 1e-9, "{} vs {oracle}", r.p_value);
        assert!(r.significant);

        let same = [0.9, 0.8, 0.7];
        let r = welch_ttest(&same, &same, 0.05).unwrap();
        assert_eq!((r.t_statistic, r.p_value, r.significant), (0.0, 1.0, false));
        let r = welch_ttest(&[0.5, 0.5], &[0.5, 0.5, 0.5], 0.05).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        assert_eq!(welch_ttest(&[0.5], &same, 0.05), Err(EvalError::SampleTooSmall(1)));
    }

    #[test]
    fn p_value_matches_integration_for_fractional_df() {
        for (t, df) in [(0.7, 2.5), (2.1, 7.3), (-3.4, 12.0), (1.0, 1.0)] {
            let oracle = tail_by_integration(t, df);
            assert!((two_sided_p(t, df) - oracle).abs() < 1e-8, "t={t} df={df}");
        }
    }

    #[test]
    fn markdown_rows() {
        let report = EvaluationReport {
            fingerprint: "f".into(),
            seed: 1,
            resample: "smote".into(),
            features: "tfidf".into(),
            model: "lr".into(),
            train_counts: ClassCounts {
                toxic: 10,
                non_toxic: 10,
            },
            test_counts: ClassCounts {
                toxic: 12,
                non_toxic: 8,
            },
            cm: ConfusionMatrix {
                tp: 8,
                tn: 6,
                fp: 2,
                fn_: 4,
            },
            metrics: metrics(&ConfusionMatrix {
                tp: 8,
                tn: 6,
                fp: 2,
                fn_: 4,
            })
            .unwrap(),
            config: serde_json::json!({}),
        };
        let table = markdown_table(std::slice::from_ref(&report));
        assert!(table.contains("| lr | tfidf | smote | 0.7000 | 0.8000 | 0.6667 | 0.7273 |"));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["cm"]["fn"], 4);
    }

    fn random_labels<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<Label> {
        (0..n)
            .map(|_| if rng.gen::<bool>() { Toxic } else { NonToxic })
            .collect()
    }

    fn brute_force(pred: &[Label], truth: &[Label]) -> (f64, f64, f64) {
        let pairs: Vec<_> = pred.iter().zip(truth).collect();
        let tp = pairs.iter().filter(|(p, t)| p.is_toxic() && t.is_toxic()).count() as f64;
        let pp = pairs.iter().filter(|(p, _)| p.is_toxic()).count() as f64;
        let ap = pairs.iter().filter(|(_, t)| t.is_toxic()).count() as f64;
        let correct = pairs.iter().filter(|(p, t)| p == t).count() as f64;
        (
            correct / pairs.len() as f64,
            if pp == 0.0 { 0.0 } else { tp / pp },
            if ap == 0.0 { 0.0 } else { tp / ap },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn metrics_match_recount(seed in any::<u64>(), n in 1usize..60) {
            let mut rng = rng::stream(seed, Stream::Synth);
            let pred = random_labels(&mut rng, n);
            let truth = random_labels(&mut rng, n);
            let m = metrics(&confusion(&pred, &truth).unwrap()).unwrap();
            let (acc, p, r) = brute_force(&pred, &truth);
            prop_assert!((m.accuracy - acc).abs() < 1e-12);
            prop_assert!((m.precision - p).abs() < 1e-12);
            prop_assert!((m.recall - r).abs() < 1e-12);
            prop_assert!((m.accuracy - m.cp as f64 / (m.cp + m.wp) as f64).abs() < 1e-12);
            if m.precision + m.recall > 0.0 {
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            }
        }

        #[test]
        fn split_is_a_partition(n in 4usize..300, seed in any::<u64>()) {
            let s = train_test_split(n, 0.75, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), n * 3 / 4);
        }

        #[test]
        fn welch_is_antisymmetric(a in prop::collection::vec(0.0..1.0f64, 2..10), b in prop::collection::vec(0.0..1.0f64, 2..10)) {
            let ab = welch_ttest(&a, &b, 0.05).unwrap();
            let ba = welch_ttest(&b, &a, 0.05).unwrap();
            prop_assert_eq!(ab.t_statistic, -ba.t_statistic);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }
}
