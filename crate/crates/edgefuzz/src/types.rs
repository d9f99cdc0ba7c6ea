//! Shared domain vocabulary: base types, etype patterns, pipeline stages,
//! and warning records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the base parameter types edge cases are keyed by.
///
/// The vocabulary is closed at runtime: values are only created by looking a
/// name up in a [`TypeVocabulary`], which defaults to the seven common types
/// and can be extended through configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BaseType(String);

impl BaseType {
    pub const BUILTINS: [&'static str; 7] =
        ["Tensor", "Int", "Bool", "Str", "Float", "Scalar", "List"];

    /// Constructs without vocabulary validation. Intended for tests and for
    /// vocabulary construction itself.
    pub fn new_unchecked(name: impl Into<String>) -> Self {
        BaseType(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The set of type names the analyzer and corpus accept.
#[derive(Debug, Clone)]
pub struct TypeVocabulary {
    types: Vec<BaseType>,
}

impl Default for TypeVocabulary {
    fn default() -> Self {
        TypeVocabulary {
            types: BaseType::BUILTINS
                .iter()
                .map(|n| BaseType::new_unchecked(*n))
                .collect(),
        }
    }
}

impl TypeVocabulary {
    pub fn with_extra(extra: &[String]) -> Self {
        let mut vocab = TypeVocabulary::default();
        for name in extra {
            if vocab.lookup(name).is_none() {
                vocab.types.push(BaseType::new_unchecked(name.clone()));
            }
        }
        vocab
    }

    /// Case-insensitive lookup returning the canonical spelling.
    pub fn lookup(&self, name: &str) -> Option<BaseType> {
        let needle = name.trim();
        self.types
            .iter()
            .find(|t| t.name().eq_ignore_ascii_case(needle))
            .cloned()
    }

    pub fn resolve(&self, name: &str) -> Result<BaseType> {
        self.lookup(name)
            .ok_or_else(|| Error::UnknownType(name.trim().to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.types.iter().map(|t| t.name()).collect()
    }
}

/// Multiset of base types; the key edge cases and APIs are matched on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EtypePattern {
    counts: BTreeMap<BaseType, u32>,
}

impl EtypePattern {
    pub fn from_types<I>(types: I) -> Self
    where
        I: IntoIterator<Item = BaseType>,
    {
        let mut counts = BTreeMap::new();
        for t in types {
            *counts.entry(t).or_insert(0) += 1;
        }
        EtypePattern { counts }
    }

    /// Canonical key: types sorted lexicographically, e.g. `Int:1|Tensor:2`.
    /// The empty pattern renders as an empty string.
    pub fn canonical_key(&self) -> String {
        self.counts
            .iter()
            .map(|(t, n)| format!("{t}:{n}"))
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let mut counts = BTreeMap::new();
        if key.is_empty() {
            return Ok(EtypePattern { counts });
        }
        for part in key.split('|') {
            let (name, n) = part
                .split_once(':')
                .ok_or_else(|| Error::PatternKey(key.to_string()))?;
            let n: u32 = n.parse().map_err(|_| Error::PatternKey(key.to_string()))?;
            if name.is_empty() || n == 0 || counts.insert(BaseType::new_unchecked(name), n).is_some()
            {
                return Err(Error::PatternKey(key.to_string()));
            }
        }
        Ok(EtypePattern { counts })
    }

    pub fn count_of(&self, t: &BaseType) -> u32 {
        self.counts.get(t).copied().unwrap_or(0)
    }

    /// Total number of type slots (multiset cardinality).
    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Multiset inclusion: every count here is covered by `other`.
    pub fn is_subset_of(&self, other: &EtypePattern) -> bool {
        self.counts
            .iter()
            .all(|(t, n)| other.count_of(t) >= *n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BaseType, u32)> {
        self.counts.iter().map(|(t, n)| (t, *n))
    }
}

impl fmt::Display for EtypePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_key())
    }
}

impl Serialize for EtypePattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical_key())
    }
}

impl<'de> Deserialize<'de> for EtypePattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let key = String::deserialize(deserializer)?;
        EtypePattern::parse_key(&key).map_err(serde::de::Error::custom)
    }
}

/// Pipeline stage an LLM call belongs to; the unit of call accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Analysis,
    Generation,
    Debug,
    Mutation,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Analysis,
        Stage::Generation,
        Stage::Debug,
        Stage::Mutation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Analysis => "analysis",
            Stage::Generation => "generation",
            Stage::Debug => "debug",
            Stage::Mutation => "mutation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-fatal event recorded while a stage runs (skipped site, dropped case).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Warning {
    pub stage: String,
    pub context: String,
    pub message: String,
}

impl Warning {
    pub fn new(
        stage: impl Into<String>,
        context: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Warning {
            stage: stage.into(),
            context: context.into(),
            message: message.into(),
        }
    }
}
