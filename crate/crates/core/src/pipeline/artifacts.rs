//! Trained-model files: the fitted parameters plus everything needed to
//! replay the training-time text path on new input.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cache::{hash_file, sha256_hex};
use super::config::{Family, ModelConfig};
use super::{PipelineError, Result, Stage};
use crate::features::{vectorize, FeatureKind, SparseRow, Vocabulary};
use crate::models::{
    DecisionTree, KnnModel, LinearModel, ModelError, Preset, ProbabilisticClassifier, TreeEnsemble, VotePair,
};
use crate::neural::{NeuralModel, TokenClassifier};
use crate::text::{Preprocessor, SpellDictionary, StopwordSet, TokenList, BUILTIN_STOPWORDS, BUILTIN_WORDS};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum TrainedModel {
    Linear(LinearModel),
    Knn(KnnModel),
    Trees(TreeEnsemble),
    Tree(DecisionTree),
    Neural(NeuralModel),
}

/// One preprocessed document in both representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub row: SparseRow,
    pub tokens: TokenList,
}

/// A trained model bound to its vocabulary.
pub struct DocumentClassifier<'a> {
    pub model: &'a TrainedModel,
    pub vocab: &'a Vocabulary,
    pub max_len: usize,
}

impl ProbabilisticClassifier<Document> for DocumentClassifier<'_> {
    fn predict_proba(&self, doc: &Document) -> std::result::Result<VotePair, ModelError> {
        match self.model {
            TrainedModel::Linear(m) => m.predict_proba(&doc.row),
            TrainedModel::Knn(m) => m.predict_proba(&doc.row),
            TrainedModel::Trees(m) => m.predict_proba(&doc.row),
            TrainedModel::Tree(m) => m.predict_proba(&doc.row),
            TrainedModel::Neural(m) => TokenClassifier {
                model: m,
                vocab: self.vocab,
                max_len: self.max_len,
            }
            .predict_proba(doc.tokens.as_slice()),
        }
    }
}

/// Preprocessing resources a model was trained with. `None` paths mean the
/// bundled lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessingRef {
    pub stopwords: Option<PathBuf>,
    pub stopwords_hash: String,
    pub dictionary: Option<PathBuf>,
    pub dictionary_hash: String,
}

fn read_resource(path: Option<&Path>, builtin: &str) -> Result<(String, String)> {
    let text = match path {
        None => builtin.to_string(),
        Some(p) => fs::read_to_string(p)
            .map_err(|e| PipelineError::data(Stage::Preprocess, format!("{}: {e}", p.display())))?,
    };
    let hash = sha256_hex(text.as_bytes());
    Ok((text, hash))
}

impl PreprocessingRef {
    /// Loads the given resources (or the bundled ones) and records them.
    pub fn load(stopwords: Option<&Path>, dictionary: Option<&Path>) -> Result<(Preprocessor, PreprocessingRef)> {
        let (stop_text, stopwords_hash) = read_resource(stopwords, BUILTIN_STOPWORDS)?;
        let (dict_text, dictionary_hash) = read_resource(dictionary, BUILTIN_WORDS)?;
        let stops = StopwordSet::from_reader(stop_text.as_bytes()).expect("in-memory read");
        let dict = SpellDictionary::from_reader(dict_text.as_bytes())
            .map_err(|e| PipelineError::data(Stage::Preprocess, format!("dictionary: {e}")))?;
        let absolute = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
        Ok((
            Preprocessor::new(dict, stops),
            PreprocessingRef {
                stopwords: stopwords.map(absolute),
                stopwords_hash,
                dictionary: dictionary.map(absolute),
                dictionary_hash,
            },
        ))
    }

    /// Reloads the recorded resources, failing if their contents changed.
    pub fn reload(&self) -> Result<Preprocessor> {
        let (pre, found) = Self::load(self.stopwords.as_deref(), self.dictionary.as_deref())?;
        for (what, path, expected, got) in [
            (
                "stopword list",
                &self.stopwords,
                &self.stopwords_hash,
                &found.stopwords_hash,
            ),
            (
                "dictionary",
                &self.dictionary,
                &self.dictionary_hash,
                &found.dictionary_hash,
            ),
        ] {
            if expected != got {
                return Err(PipelineError::ManifestMismatch {
                    path: path.clone().unwrap_or_else(|| PathBuf::from("<bundled>")),
                    what,
                    expected: expected.clone(),
                    found: got.clone(),
                });
            }
        }
        Ok(pre)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub family: Family,
    pub preset: Preset,
    pub config: ModelConfig,
    pub features: FeatureKind,
    /// Vocabulary file, relative to the model file.
    pub vocab_path: String,
    pub vocab_hash: String,
    /// Sequence length for neural families.
    pub max_len: Option<usize>,
    pub preprocessing: PreprocessingRef,
    pub model: TrainedModel,
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path, stage: Stage) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| PipelineError::data(stage.clone(), format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))
}

/// A model file with its verified vocabulary and preprocessor.
pub struct LoadedModel {
    pub file: ModelFile,
    pub vocab: Vocabulary,
    pub preprocessor: Preprocessor,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = read_json(path, Stage::Predict)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(PipelineError::data(
                Stage::Predict,
                format!("{}: unsupported format_version {}", path.display(), file.format_version),
            ));
        }
        let vocab_path = path.parent().unwrap_or(Path::new("")).join(&file.vocab_path);
        let found = hash_file(&vocab_path)
            .map_err(|e| PipelineError::data(Stage::Predict, format!("{}: {e}", vocab_path.display())))?;
        if found != file.vocab_hash {
            return Err(PipelineError::ManifestMismatch {
                path: vocab_path,
                what: "vocabulary",
                expected: file.vocab_hash.clone(),
                found,
            });
        }
        let text = fs::read(&vocab_path)
            .map_err(|e| PipelineError::data(Stage::Predict, format!("{}: {e}", vocab_path.display())))?;
        let vocab = Vocabulary::read_from(text.as_slice())
            .map_err(|e| PipelineError::data(Stage::Predict, format!("{}: {e}", vocab_path.display())))?;
        let preprocessor = file.preprocessing.reload()?;
        Ok(LoadedModel {
            file,
            vocab,
            preprocessor,
        })
    }

    pub fn document(&self, text: &str) -> Document {
        let tokens = self.preprocessor.preprocess(text);
        Document {
            row: vectorize(&tokens, &self.vocab, self.file.features),
            tokens,
        }
    }

    pub fn classifier(&self) -> DocumentClassifier<'_> {
        DocumentClassifier {
            model: &self.file.model,
            vocab: &self.vocab,
            max_len: self.file.max_len.unwrap_or(0),
        }
    }
}
