//! Declarative experiment configuration (JSON) and model-family resolution.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::eval::DEFAULT_SPLIT_RATIO;
use crate::features::FeatureKind;
use crate::models::{BoostingConfig, ForestConfig, KnnConfig, LinearConfig, Preset, TreeConfig};
use crate::neural::TrainSpec;
use crate::resample::Strategy;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Svm,
    Knn,
    Rf,
    Gbm,
    Dt,
    Lstm,
    Cnn,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Lr,
        Family::Svm,
        Family::Knn,
        Family::Rf,
        Family::Gbm,
        Family::Dt,
        Family::Lstm,
        Family::Cnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lr => "lr",
            Family::Svm => "svm",
            Family::Knn => "knn",
            Family::Rf => "rf",
            Family::Gbm => "gbm",
            Family::Dt => "dt",
            Family::Lstm => "lstm",
            Family::Cnn => "cnn",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Family::Lstm | Family::Cnn)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| {
            config_err(format!(
                "unknown model `{s}` (expected one of lr, svm, knn, rf, gbm, dt, lstm, cnn)"
            ))
        })
    }
}

/// Order of resampling relative to the train/test split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageMode {
    /// Resample the whole corpus, then split.
    #[default]
    Paper,
    /// Split first and resample only the training rows.
    NoLeakage,
}

impl FromStr for LeakageMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(LeakageMode::Paper),
            "no_leakage" => Ok(LeakageMode::NoLeakage),
            other => Err(config_err(format!("unknown leakage mode `{other}`"))),
        }
    }
}

/// Fully resolved hyperparameters of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum ModelConfig {
    Lr(LinearConfig),
    Svm(LinearConfig),
    Knn(KnnConfig),
    Rf(ForestConfig),
    Gbm(BoostingConfig),
    Dt(TreeConfig),
    Lstm(TrainSpec),
    Cnn(TrainSpec),
}

impl ModelConfig {
    pub fn preset(family: Family, preset: Preset, seed: u64) -> Self {
        match family {
            Family::Lr => ModelConfig::Lr(LinearConfig::logistic().with_preset(preset)),
            Family::Svm => ModelConfig::Svm(LinearConfig::svm().with_preset(preset)),
            Family::Knn => ModelConfig::Knn(KnnConfig::default()),
            Family::Rf => ModelConfig::Rf(ForestConfig::preset(preset)),
            Family::Gbm => ModelConfig::Gbm(BoostingConfig::preset(preset)),
            Family::Dt => ModelConfig::Dt(TreeConfig::default()),
            Family::Lstm | Family::Cnn => {
                let base = if preset == Preset::Desk {
                    TrainSpec::desk()
                } else {
                    TrainSpec::default()
                };
                let spec = TrainSpec { seed, ..base };
                if family == Family::Lstm {
                    ModelConfig::Lstm(spec)
                } else {
                    ModelConfig::Cnn(spec)
                }
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelConfig::Lr(_) => Family::Lr,
            ModelConfig::Svm(_) => Family::Svm,
            ModelConfig::Knn(_) => Family::Knn,
            ModelConfig::Rf(_) => Family::Rf,
            ModelConfig::Gbm(_) => Family::Gbm,
            ModelConfig::Dt(_) => Family::Dt,
            ModelConfig::Lstm(_) => Family::Lstm,
            ModelConfig::Cnn(_) => Family::Cnn,
        }
    }

    /// Hyperparameters as a JSON object.
    pub fn params(&self) -> Value {
        serde_json::to_value(self).expect("configs serialize")["params"].clone()
    }

    /// Replaces the named hyperparameters; unknown names are errors.
    pub fn with_overrides(&self, overrides: &Map<String, Value>) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut params = self.params();
        let object = params.as_object_mut().expect("params are objects");
        for (key, value) in overrides {
            if !object.contains_key(key) {
                let known: Vec<&str> = object.keys().map(String::as_str).collect();
                return Err(config_err(format!(
                    "`{key}` is not a {} hyperparameter (known: {})",
                    self.family(),
                    known.join(", ")
                )));
            }
            object.insert(key.clone(), value.clone());
        }
        let tagged = serde_json::json!({ "family": self.family(), "params": params });
        serde_json::from_value(tagged).map_err(|e| config_err(format!("{} overrides: {e}", self.family())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(config_err(format!("{}: {name} must be at least 1", self.family())))
            } else {
                Ok(())
            }
        };
        match self {
            ModelConfig::Lr(c) | ModelConfig::Svm(c) => {
                positive("max_iter", c.max_iter)?;
                if !(c.c > 0.0) || !c.c.is_finite() {
                    return Err(config_err(format!("{}: C must be positive", self.family())));
                }
                if !(c.learning_rate >= 0.0) {
                    return Err(config_err(format!(
                        "{}: learning_rate must be non-negative",
                        self.family()
                    )));
                }
            }
            ModelConfig::Knn(c) => {
                positive("n_neighbors", c.n_neighbors)?;
                positive("leaf_size", c.leaf_size)?;
                if c.p != 2 {
                    return Err(config_err("knn: only p = 2 is supported"));
                }
            }
            ModelConfig::Rf(c) => {
                positive("n_estimators", c.n_estimators)?;
                positive("max_depth", c.max_depth)?;
            }
            ModelConfig::Gbm(c) => {
                positive("n_estimators", c.n_estimators)?;
                positive("max_depth", c.max_depth)?;
                if !(c.learning_rate > 0.0) {
                    return Err(config_err("gbm: learning_rate must be positive"));
                }
            }
            ModelConfig::Dt(c) => positive("max_depth", c.max_depth)?,
            ModelConfig::Lstm(s) | ModelConfig::Cnn(s) => s
                .validate()
                .map_err(|e| config_err(format!("{}: {e}", self.family())))?,
        }
        Ok(())
    }
}

/// A `models` entry: either a bare family name or an object with a preset
/// and overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum ModelEntry {
    Name(String),
    Spec {
        family: String,
        #[serde(default)]
        preset: Option<Preset>,
        #[serde(default)]
        overrides: Map<String, Value>,
    },
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    dataset: Option<PathBuf>,
    #[serde(default = "default_cap")]
    non_toxic_cap: usize,
    #[serde(default)]
    class_cap: Option<usize>,
    #[serde(default = "default_features")]
    features: FeatureKind,
    #[serde(default = "default_max_features")]
    max_features: usize,
    #[serde(default = "default_resample")]
    resample: Strategy,
    #[serde(default = "default_smote_k")]
    smote_k: usize,
    #[serde(default = "default_ratio")]
    split_ratio: f64,
    models: Vec<ModelEntry>,
    #[serde(default)]
    preset: Option<Preset>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    leakage_mode: LeakageMode,
    #[serde(default)]
    stopwords: Option<PathBuf>,
    #[serde(default)]
    dictionary: Option<PathBuf>,
}

fn default_cap() -> usize {
    70_000
}
fn default_features() -> FeatureKind {
    FeatureKind::Tfidf
}
fn default_max_features() -> usize {
    20_000
}
fn default_resample() -> Strategy {
    Strategy::None
}
fn default_smote_k() -> usize {
    5
}
fn default_seed() -> u64 {
    42
}
fn default_ratio() -> f64 {
    DEFAULT_SPLIT_RATIO
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: Family,
    pub preset: Preset,
    pub config: ModelConfig,
}

/// A validated experiment with every default filled in. Its JSON form is
/// embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Majority-class cap applied after relabeling.
    pub non_toxic_cap: usize,
    /// Optional per-class cap for desk-scale balanced subsamples.
    pub class_cap: Option<usize>,
    pub features: FeatureKind,
    pub max_features: usize,
    pub resample: Strategy,
    pub smote_k: usize,
    pub split_ratio: f64,
    pub models: Vec<ModelSpec>,
    pub seed: u64,
    pub leakage_mode: LeakageMode,
    pub stopwords: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub seed: Option<u64>,
    pub leakage_mode: Option<LeakageMode>,
    pub stopwords: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text, overrides)?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf, from_cli: bool| {
            if !from_cli && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.dataset, overrides.dataset.is_some());
        if let Some(p) = config.stopwords.as_mut() {
            rebase(p, overrides.stopwords.is_some());
        }
        if let Some(p) = config.dictionary.as_mut() {
            rebase(p, overrides.dictionary.is_some());
        }
        Ok(config)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| config_err(format!("config: {e}")))?;
        let seed = overrides.seed.unwrap_or(raw.seed);
        let dataset = overrides
            .dataset
            .clone()
            .or(raw.dataset)
            .ok_or_else(|| config_err("no dataset given (config key `dataset` or --dataset)"))?;
        if raw.models.is_empty() {
            return Err(config_err("at least one model is required"));
        }
        if !(raw.split_ratio > 0.0 && raw.split_ratio < 1.0) {
            return Err(config_err(format!(
                "split_ratio must be in (0, 1), got {}",
                raw.split_ratio
            )));
        }
        for (name, v) in [
            ("non_toxic_cap", raw.non_toxic_cap),
            ("max_features", raw.max_features),
            ("smote_k", raw.smote_k),
        ] {
            if v == 0 {
                return Err(config_err(format!("{name} must be at least 1")));
            }
        }
        if raw.class_cap == Some(0) {
            return Err(config_err("class_cap must be at least 1"));
        }
        let default_preset = raw.preset.unwrap_or_default();
        let mut models = Vec::with_capacity(raw.models.len());
        for entry in raw.models {
            let (family, preset, extra) = match entry {
                ModelEntry::Name(name) => (name, default_preset, Map::new()),
                ModelEntry::Spec {
                    family,
                    preset,
                    overrides,
                } => (family, preset.unwrap_or(default_preset), overrides),
            };
            let family: Family = family.parse()?;
            if models.iter().any(|m: &ModelSpec| m.name == family) {
                return Err(config_err(format!("model `{family}` is listed twice")));
            }
            let config = ModelConfig::preset(family, preset, seed).with_overrides(&extra)?;
            config.validate()?;
            models.push(ModelSpec {
                name: family,
                preset,
                config,
            });
        }
        Ok(ExperimentConfig {
            dataset,
            non_toxic_cap: raw.non_toxic_cap,
            class_cap: raw.class_cap,
            features: raw.features,
            max_features: raw.max_features,
            resample: raw.resample,
            smote_k: raw.smote_k,
            split_ratio: raw.split_ratio,
            models,
            seed,
            leakage_mode: overrides.leakage_mode.unwrap_or(raw.leakage_mode),
            stopwords: overrides.stopwords.clone().or(raw.stopwords),
            dictionary: overrides.dictionary.clone().or(raw.dictionary),
        })
    }

    /// The same experiment under another seed; neural seeds follow.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut next = self.clone();
        next.seed = seed;
        for m in &mut next.models {
            if let ModelConfig::Lstm(s) | ModelConfig::Cnn(s) = &mut m.config {
                if s.seed == self.seed {
                    s.seed = seed;
                }
            }
        }
        next
    }

    pub fn has_model(&self, family: Family) -> bool {
        self.models.iter().any(|m| m.name == family)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        super::cache::sha256_hex(serde_json::to_string(&self.to_json()).expect("json").as_bytes())
    }
}
