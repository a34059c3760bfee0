//! Canonical class labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A canonical sentiment label.
///
/// The derived ordering is the canonical class order `+1, 0, -1`, which fixes
/// feature block layout and prediction tie-breaking everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Positive,
    Neutral,
    Negative,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Neutral => 0,
            Label::Negative => -1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "+1",
            Label::Neutral => "0",
            Label::Negative => "-1",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "+1" | "1" | "pos" | "positive" => Ok(Label::Positive),
            "0" | "neu" | "neutral" => Ok(Label::Neutral),
            "-1" | "neg" | "negative" => Ok(Label::Negative),
            _ => Err(Error::UnknownLabel {
                token: s.to_string(),
                line: 0,
            }),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered, duplicate-free set of labels in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Label>", into = "Vec<Label>")]
pub struct ClassSet(Vec<Label>);

impl ClassSet {
    pub fn new(labels: impl IntoIterator<Item = Label>) -> Result<Self> {
        let mut v: Vec<Label> = labels.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Empty("class set".into()));
        }
        Ok(ClassSet(v))
    }

    pub fn binary() -> Self {
        ClassSet(vec![Label::Positive, Label::Negative])
    }

    pub fn ternary() -> Self {
        ClassSet(vec![Label::Positive, Label::Neutral, Label::Negative])
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.0.contains(&label)
    }

    /// Block position of `label`, or `None` when absent.
    pub fn index_of(&self, label: Label) -> Option<usize> {
        self.0.iter().position(|&l| l == label)
    }
}

impl TryFrom<Vec<Label>> for ClassSet {
    type Error = Error;

    fn try_from(v: Vec<Label>) -> Result<Self> {
        ClassSet::new(v)
    }
}

impl From<ClassSet> for Vec<Label> {
    fn from(c: ClassSet) -> Self {
        c.0
    }
}
