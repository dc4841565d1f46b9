//! Canonical programming-language identifiers and the alias registry that
//! produces them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

const DEFAULT_REGISTRY: &str = include_str!("../../data/registry.json");

/// Canonical lowercase language name, or the distinguished `unknown`.
///
/// Values are produced by [`LanguageRegistry::normalize`]; the only way to
/// get one without a registry is [`LanguageId::unknown`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageId(String);

impl LanguageId {
    pub const UNKNOWN: &'static str = "unknown";

    pub fn unknown() -> Self {
        LanguageId(Self::UNKNOWN.to_string())
    }

    pub fn is_unknown(&self) -> bool {
        self.0 == Self::UNKNOWN
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn from_canonical(name: &str) -> Self {
        LanguageId(name.to_string())
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryFile {
    languages: Vec<String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

/// The set of languages a corpus may name, plus an alias table
/// (`"c++"` → `cpp`, `"js"` → `javascript`, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRegistry {
    canonical: BTreeSet<String>,
    aliases: BTreeMap<String, String>,
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::from_json(DEFAULT_REGISTRY).expect("bundled registry is valid")
    }
}

impl LanguageRegistry {
    pub fn new<I, S>(languages: I, aliases: BTreeMap<String, String>) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let canonical: BTreeSet<String> = languages
            .into_iter()
            .map(|s| fold(s.as_ref()))
            .collect();
        if canonical.iter().any(|l| l.is_empty() || l == LanguageId::UNKNOWN) {
            return Err(CorpusError::InvalidRegistry(
                "language names must be nonempty and not `unknown`".into(),
            ));
        }
        let mut folded = BTreeMap::new();
        for (alias, target) in aliases {
            let (alias, target) = (fold(&alias), fold(&target));
            if !canonical.contains(&target) {
                return Err(CorpusError::InvalidRegistry(format!(
                    "alias `{alias}` points at `{target}`, which is not a registered language"
                )));
            }
            if canonical.contains(&alias) && alias != target {
                return Err(CorpusError::InvalidRegistry(format!(
                    "alias `{alias}` shadows a canonical language name"
                )));
            }
            folded.insert(alias, target);
        }
        Ok(LanguageRegistry {
            canonical,
            aliases: folded,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let file: RegistryFile = serde_json::from_str(text)
            .map_err(|e| CorpusError::InvalidRegistry(e.to_string()))?;
        Self::new(file.languages, file.aliases)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = RegistryFile {
            languages: self.canonical.iter().cloned().collect(),
            aliases: self.aliases.clone(),
        };
        serde_json::to_string_pretty(&file).expect("registry serializes")
    }

    /// Maps a user-facing name to its canonical id. Case and surrounding
    /// whitespace are ignored; `unknown` is always accepted.
    pub fn normalize(&self, name: &str) -> Result<LanguageId, CorpusError> {
        self.lookup(name)
            .ok_or_else(|| CorpusError::UnknownLanguageName {
                name: name.to_string(),
                line: None,
            })
    }

    /// Like [`normalize`](Self::normalize) but returns `unknown` for names
    /// the registry does not know.
    pub fn normalize_or_unknown(&self, name: &str) -> LanguageId {
        self.lookup(name).unwrap_or_else(LanguageId::unknown)
    }

    fn lookup(&self, name: &str) -> Option<LanguageId> {
        let key = fold(name);
        if key == LanguageId::UNKNOWN {
            return Some(LanguageId::unknown());
        }
        if self.canonical.contains(&key) {
            return Some(LanguageId(key));
        }
        self.aliases.get(&key).map(|t| LanguageId(t.clone()))
    }

    pub fn contains(&self, id: &LanguageId) -> bool {
        id.is_unknown() || self.canonical.contains(id.as_str())
    }

    /// Registered languages in canonical (lexicographic) order.
    pub fn languages(&self) -> Vec<LanguageId> {
        self.canonical.iter().map(|s| LanguageId(s.clone())).collect()
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }
}

fn fold(name: &str) -> String {
    name.trim().to_lowercase()
}
