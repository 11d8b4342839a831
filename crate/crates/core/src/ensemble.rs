//! Soft-voting combiner: the class probabilities of two classifiers are
//! averaged and the larger mean wins, an exact tie going to `Toxic`.

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::models::{ModelError, ProbabilisticClassifier, VotePair};

/// Identifier of the tie rule recorded in ensemble manifests.
pub const TIE_RULE: &str = "tie-toxic-v1";

pub fn joint_probability(p_a: f64, p_b: f64) -> Result<f64, ModelError> {
    for p in [p_a, p_b] {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::OutOfRange(p));
        }
    }
    Ok((p_a + p_b) / 2.0)
}

/// Argmax of an averaged pair; equal probabilities resolve to `Toxic`.
pub fn soft_vote_class(pair: &VotePair) -> Label {
    if pair.toxic_prob >= pair.nontoxic_prob {
        Label::Toxic
    } else {
        Label::NonToxic
    }
}

/// A member's vote, with un-encodable input counting as an even split.
fn member_vote<X: ?Sized, M: ProbabilisticClassifier<X>>(model: &M, x: &X) -> Result<VotePair, ModelError> {
    match model.predict_proba(x) {
        Err(ModelError::EmptyAfterEncoding) => Ok(VotePair::uniform()),
        other => other,
    }
}

pub fn soft_vote_predict<X, A, B>(model_a: &A, model_b: &B, x: &X) -> Result<(Label, VotePair), ModelError>
where
    X: ?Sized + Sync,
    A: ProbabilisticClassifier<X> + Sync,
    B: ProbabilisticClassifier<X> + Sync,
{
    let (a, b) = rayon::join(|| member_vote(model_a, x), || member_vote(model_b, x));
    let (a, b) = (a?, b?);
    let pair = VotePair {
        toxic_prob: joint_probability(a.toxic_prob, b.toxic_prob)?,
        nontoxic_prob: joint_probability(a.nontoxic_prob, b.nontoxic_prob)?,
    };
    Ok((soft_vote_class(&pair), pair))
}

/// Two classifiers voting as one.
#[derive(Debug, Clone, Copy)]
pub struct SoftVote<A, B> {
    pub a: A,
    pub b: B,
}

impl<X, A, B> ProbabilisticClassifier<X> for SoftVote<A, B>
where
    X: ?Sized + Sync,
    A: ProbabilisticClassifier<X> + Sync,
    B: ProbabilisticClassifier<X> + Sync,
{
    fn predict_proba(&self, x: &X) -> Result<VotePair, ModelError> {
        soft_vote_predict(&self.a, &self.b, x).map(|(_, p)| p)
    }

    fn predict(&self, x: &X) -> Result<Label, ModelError> {
        soft_vote_predict(&self.a, &self.b, x).map(|(l, _)| l)
    }
}

/// On-disk description of an ensemble: its two member model files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format_version: u32,
    pub members: [String; 2],
    pub tie_rule: String,
}

impl EnsembleManifest {
    pub fn new(member_a: impl Into<String>, member_b: impl Into<String>) -> Self {
        EnsembleManifest {
            format_version: 1,
            members: [member_a.into(), member_b.into()],
            tie_rule: TIE_RULE.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FeatureMatrix, SparseRow};
    use crate::models::{fit_linear, LinearConfig, LinearKind};
    use proptest::prelude::*;
    use Label::*;

    /// Returns a fixed pair for every input.
    struct Fixed(Result<VotePair, ModelError>);

    impl ProbabilisticClassifier<()> for Fixed {
        fn predict_proba(&self, _: &()) -> Result<VotePair, ModelError> {
            self.0.clone()
        }
    }

    fn fixed(t: f64) -> Fixed {
        Fixed(Ok(VotePair::from_toxic(t)))
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn joint_probability_examples() {
        assert!(close(joint_probability(0.6, 0.5).unwrap(), 0.55));
        assert!(close(joint_probability(0.4, 0.5).unwrap(), 0.45));
        assert_eq!(joint_probability(0.3, 0.3).unwrap(), 0.3);
        assert_eq!(joint_probability(1.2, 0.5), Err(ModelError::OutOfRange(1.2)));
        assert!(joint_probability(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn soft_vote_examples() {
        let (class, pair) = soft_vote_predict(&fixed(0.6), &fixed(0.5), &()).unwrap();
        assert_eq!(class, Toxic);
        assert!(close(pair.toxic_prob, 0.55) && close(pair.nontoxic_prob, 0.45));

        let (class, pair) = soft_vote_predict(&fixed(0.0), &fixed(0.0), &()).unwrap();
        assert_eq!((class, pair), (NonToxic, VotePair::from_toxic(0.0)));

        let (class, pair) = soft_vote_predict(&fixed(0.7), &fixed(0.3), &()).unwrap();
        assert_eq!(class, Toxic);
        assert!(close(pair.toxic_prob, 0.5) && close(pair.nontoxic_prob, 0.5));
    }

    #[test]
    fn unencodable_input_counts_as_even_split() {
        let empty = Fixed(Err(ModelError::EmptyAfterEncoding));
        let (class, pair) = soft_vote_predict(&empty, &fixed(0.2), &()).unwrap();
        assert!(close(pair.toxic_prob, 0.35));
        assert_eq!(class, NonToxic);
        let (class, pair) = soft_vote_predict(&empty, &Fixed(Err(ModelError::EmptyAfterEncoding)), &()).unwrap();
        assert_eq!((class, pair), (Toxic, VotePair::uniform()));

        let broken = Fixed(Err(ModelError::EmptySequence));
        assert_eq!(
            soft_vote_predict(&broken, &fixed(0.5), &()),
            Err(ModelError::EmptySequence)
        );
    }

    #[test]
    fn combines_any_two_classifiers() {
        let x = FeatureMatrix {
            rows: [[1.0, 0.0], [0.0, 1.0], [0.9, 0.2], [0.1, 1.1]]
                .iter()
                .map(|r| SparseRow::from_dense(r))
                .collect(),
            width: 2,
            kind: FeatureKind::Tfidf,
        };
        let y = [Toxic, NonToxic, Toxic, NonToxic];
        let lr = fit_linear(LinearKind::Logistic, &x, &y, &LinearConfig::logistic()).unwrap();
        let svm = fit_linear(LinearKind::Svm, &x, &y, &LinearConfig::svm()).unwrap();
        let vote = SoftVote { a: &lr, b: &svm };
        for (row, label) in x.rows.iter().zip(&y) {
            assert_eq!(vote.predict(row).unwrap(), *label);
            let pair = vote.predict_proba(row).unwrap();
            let expected =
                (lr.predict_proba(row).unwrap().toxic_prob + svm.predict_proba(row).unwrap().toxic_prob) / 2.0;
            assert!(close(pair.toxic_prob, expected));
        }
    }

    #[test]
    fn manifest_round_trip() {
        let m = EnsembleManifest::new("lstm.json", "cnn.json");
        let back: EnsembleManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.tie_rule, TIE_RULE);
    }

    proptest! {
        #[test]
        fn symmetric_and_normalized(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let ab = soft_vote_predict(&fixed(a), &fixed(b), &()).unwrap();
            let ba = soft_vote_predict(&fixed(b), &fixed(a), &()).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((ab.1.toxic_prob + ab.1.nontoxic_prob - 1.0).abs() < 1e-9);
        }

        #[test]
        fn raising_toxic_probabilities_never_unflags(a in 0.0..=1.0f64, b in 0.0..=1.0f64, da in 0.0..=1.0f64, db in 0.0..=1.0f64) {
            let before = soft_vote_predict(&fixed(a), &fixed(b), &()).unwrap().0;
            let after = soft_vote_predict(&fixed((a + da).min(1.0)), &fixed((b + db).min(1.0)), &()).unwrap().0;
            prop_assert!(!(before == Toxic && after == NonToxic));
        }
    }
}
