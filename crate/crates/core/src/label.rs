use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary class of a comment. `Toxic` is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonToxic,
    Toxic,
}

impl Label {
    pub fn is_toxic(self) -> bool {
        self == Label::Toxic
    }

    /// 1.0 for toxic, 0.0 otherwise; the regression target used by the trainers.
    pub fn target(self) -> f64 {
        match self {
            Label::Toxic => 1.0,
            Label::NonToxic => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Toxic => "toxic",
            Label::NonToxic => "non_toxic",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Toxic => Label::NonToxic,
            Label::NonToxic => Label::Toxic,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label `{0}`")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toxic" => Ok(Label::Toxic),
            "non_toxic" => Ok(Label::NonToxic),
            other => Err(ParseLabelError(other.to_string())),
        }
    }
}

/// Per-class totals of a label sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub toxic: usize,
    pub non_toxic: usize,
}

impl ClassCounts {
    pub fn from_labels<'a, I: IntoIterator<Item = &'a Label>>(labels: I) -> Self {
        let mut counts = ClassCounts::default();
        for label in labels {
            counts.add(*label);
        }
        counts
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::Toxic => self.toxic += 1,
            Label::NonToxic => self.non_toxic += 1,
        }
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Toxic => self.toxic,
            Label::NonToxic => self.non_toxic,
        }
    }

    pub fn total(&self) -> usize {
        self.toxic + self.non_toxic
    }

    /// The larger class; `NonToxic` when the classes are the same size.
    pub fn majority(&self) -> Label {
        if self.toxic > self.non_toxic {
            Label::Toxic
        } else {
            Label::NonToxic
        }
    }

    pub fn both_present(&self) -> bool {
        self.toxic > 0 && self.non_toxic > 0
    }
}
