//! Hyperparameters per model family. Defaults mirror the classical
//! configuration table (RF 300 trees / depth 100, GBM 100 / 100, LR C=1 and
//! 100 iterations, linear SVM C=2, KNN 3 neighbours with leaf size 30).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Named hyperparameter sets.
///
/// `Table` is the default configuration record; `Prose` uses the
/// 100-tree / depth-60 values quoted for the tree ensembles; `Desk` keeps
/// boosting tractable (depth 6, shrinkage 0.1) and gives the linear models
/// 1000 gradient-descent epochs, enough to converge on TF-IDF rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Table,
    Prose,
    Desk,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Table => "table",
            Preset::Prose => "prose",
            Preset::Desk => "desk",
        })
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Preset::Table),
            "prose" => Ok(Preset::Prose),
            "desk" => Ok(Preset::Desk),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_iter: usize,
    pub learning_rate: f64,
}

impl LinearConfig {
    pub fn logistic() -> Self {
        LinearConfig {
            c: 1.0,
            max_iter: 100,
            learning_rate: 0.1,
        }
    }

    pub fn svm() -> Self {
        LinearConfig {
            c: 2.0,
            max_iter: 100,
            learning_rate: 0.1,
        }
    }

    pub fn with_preset(self, preset: Preset) -> Self {
        match preset {
            Preset::Table | Preset::Prose => self,
            Preset::Desk => LinearConfig { max_iter: 1000, ..self },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnConfig {
    pub n_neighbors: usize,
    /// Accepted for configuration parity; the search is brute force.
    pub leaf_size: usize,
    /// Minkowski order. Only 2 (Euclidean) is supported.
    pub p: u32,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            n_neighbors: 3,
            leaf_size: 30,
            p: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
}

impl ForestConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Table | Preset::Desk => ForestConfig {
                n_estimators: 300,
                max_depth: 100,
            },
            Preset::Prose => ForestConfig {
                n_estimators: 100,
                max_depth: 60,
            },
        }
    }
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self::preset(Preset::Table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostingConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Shrinkage applied to every tree's contribution.
    pub learning_rate: f64,
}

impl BoostingConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Table => BoostingConfig {
                n_estimators: 100,
                max_depth: 100,
                learning_rate: 0.1,
            },
            Preset::Prose => BoostingConfig {
                n_estimators: 100,
                max_depth: 60,
                learning_rate: 0.1,
            },
            Preset::Desk => BoostingConfig {
                n_estimators: 100,
                max_depth: 6,
                learning_rate: 0.1,
            },
        }
    }
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self::preset(Preset::Table)
    }
}

/// Single CART tree; uses the forest depth and considers every feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 100 }
    }
}
