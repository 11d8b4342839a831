//! Binary toxic-comment classification.
//!
//! The crate covers the whole pipeline, from a Jigsaw-schema CSV to evaluation
//! reports:
//!
//! - [`corpus`]: CSV ingest, binary relabeling and majority capping
//! - [`text`]: tokenization, spell correction, stopword removal, Porter stemming
//! - [`features`]: vocabulary, bag-of-words and TF-IDF sparse rows
//! - [`resample`]: random under-sampling and SMOTE
//! - [`models`]: logistic regression, linear SVM, KNN, decision trees, random forest, GBM
//! - [`neural`]: embedding LSTM and CNN classifiers with hand-derived gradients
//! - [`ensemble`]: soft-voting combiner of two probabilistic classifiers
//! - [`eval`]: train/test split, confusion metrics, Welch t-test, reports
//! - [`pipeline`]: declarative experiment configuration and orchestration
//!
//! Every stochastic step draws from a seeded ChaCha stream (see [`rng`]), so a
//! fixed configuration and seed reproduce byte-identical outputs.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod ensemble;
pub mod eval;
pub mod features;
pub mod label;
pub mod models;
pub mod neural;
pub mod pipeline;
pub mod resample;
pub mod rng;
pub mod synth;
pub mod text;

pub use label::Label;
pub use models::{ProbabilisticClassifier, VotePair};
