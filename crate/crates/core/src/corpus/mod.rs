//! Task and completion records: the data model, line-delimited JSON
//! ingestion, and the task/completion join.

mod language;

pub use language::{LanguageId, LanguageRegistry};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: duplicate task id `{task_id}`")]
    DuplicateTaskId { line: usize, task_id: String },
    #[error("unknown language name `{name}`{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownLanguageName { name: String, line: Option<usize> },
    #[error("invalid language registry: {0}")]
    InvalidRegistry(String),
    #[error("unsupported record format `{0}`")]
    UnsupportedFormat(String),
}

/// On-disk record encodings understood by the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordFormat {
    /// One JSON object per line.
    #[default]
    JsonLines,
}

impl FromStr for RecordFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json-lines" | "jsonlines" => Ok(RecordFormat::JsonLines),
            other => Err(CorpusError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Natural language the instruction was written in (`en`, `fr`, ...).
/// Carried as metadata only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NaturalLanguageTag(String);

impl NaturalLanguageTag {
    pub fn new(code: impl Into<String>) -> Option<Self> {
        let code = code.into();
        let trimmed = code.trim();
        if trimmed.is_empty() {
            None
        } else {
            Some(NaturalLanguageTag(trimmed.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_english(&self) -> bool {
        matches!(self.0.to_ascii_lowercase().as_str(), "en" | "eng" | "english")
            || self.0.to_ascii_lowercase().starts_with("en-")
            || self.0.to_ascii_lowercase().starts_with("en_")
    }
}

impl TryFrom<String> for NaturalLanguageTag {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        NaturalLanguageTag::new(value).ok_or_else(|| "natural_language must be nonempty".to_string())
    }
}

impl From<NaturalLanguageTag> for String {
    fn from(tag: NaturalLanguageTag) -> Self {
        tag.0
    }
}

impl fmt::Display for NaturalLanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Generation,
    Translation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub dataset: String,
    pub kind: TaskKind,
    pub prompt: String,
    pub expected_language: LanguageId,
    pub source_language: Option<LanguageId>,
    pub natural_language: NaturalLanguageTag,
}

#[derive(Debug, Deserialize)]
struct RawTask {
    task_id: String,
    dataset: String,
    kind: TaskKind,
    prompt: String,
    expected_language: String,
    #[serde(default)]
    source_language: Option<String>,
    natural_language: NaturalLanguageTag,
}

impl RawTask {
    fn validate(self, line: usize, registry: &LanguageRegistry) -> Result<TaskRecord, CorpusError> {
        let malformed = |reason: &str| CorpusError::MalformedRecord {
            line,
            reason: reason.to_string(),
        };
        if self.task_id.trim().is_empty() {
            return Err(malformed("task_id is empty"));
        }
        let normalize = |name: &str| {
            registry.normalize(name).map_err(|_| CorpusError::UnknownLanguageName {
                name: name.to_string(),
                line: Some(line),
            })
        };
        let expected_language = normalize(&self.expected_language)?;
        if expected_language.is_unknown() {
            return Err(malformed("expected_language must not be `unknown`"));
        }
        let source_language = match (self.kind, self.source_language.as_deref()) {
            (TaskKind::Translation, None) => {
                return Err(malformed("translation task without source_language"))
            }
            (TaskKind::Generation, Some(_)) => {
                return Err(malformed("generation task must not carry source_language"))
            }
            (TaskKind::Translation, Some(name)) => {
                let id = normalize(name)?;
                if id.is_unknown() {
                    return Err(malformed("source_language must not be `unknown`"));
                }
                Some(id)
            }
            (TaskKind::Generation, None) => None,
        };
        Ok(TaskRecord {
            task_id: self.task_id,
            dataset: self.dataset,
            kind: self.kind,
            prompt: self.prompt,
            expected_language,
            source_language,
            natural_language: self.natural_language,
        })
    }
}

/// One raw model response for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub task_id: String,
    pub model_id: String,
    pub response: String,
    pub temperature: f64,
    pub created_at: DateTime<FixedOffset>,
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Yields `(line_number, line)` for every non-blank line, 1-based.
fn records(
    reader: BufReader<File>,
    path: &Path,
) -> impl Iterator<Item = Result<(usize, String), CorpusError>> + '_ {
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(source) => Some(Err(CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })),
        })
}

pub fn load_tasks(
    path: &Path,
    format: RecordFormat,
    registry: &LanguageRegistry,
) -> Result<Vec<TaskRecord>, CorpusError> {
    let RecordFormat::JsonLines = format;
    let mut seen = HashSet::new();
    let mut tasks = Vec::new();
    for item in records(open(path)?, path) {
        let (line, text) = item?;
        let raw: RawTask = serde_json::from_str(&text).map_err(|e| CorpusError::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        let task = raw.validate(line, registry)?;
        if !seen.insert(task.task_id.clone()) {
            return Err(CorpusError::DuplicateTaskId {
                line,
                task_id: task.task_id,
            });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

pub fn write_tasks<W: Write>(mut out: W, tasks: &[TaskRecord]) -> io::Result<()> {
    for task in tasks {
        serde_json::to_writer(&mut out, task)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_completion(line: usize, text: &str) -> Result<CompletionRecord, CorpusError> {
    let record: CompletionRecord =
        serde_json::from_str(text).map_err(|e| CorpusError::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
    if record.task_id.trim().is_empty() || record.model_id.trim().is_empty() {
        return Err(CorpusError::MalformedRecord {
            line,
            reason: "task_id and model_id must be nonempty".into(),
        });
    }
    Ok(record)
}

/// Loads every completion, failing on the first malformed line.
pub fn load_completions(path: &Path) -> Result<Vec<CompletionRecord>, CorpusError> {
    records(open(path)?, path)
        .map(|item| item.and_then(|(line, text)| parse_completion(line, &text)))
        .collect()
}

/// Loads completions, skipping malformed lines and returning them as errors
/// alongside the good records.
pub fn load_completions_lenient(
    path: &Path,
) -> Result<(Vec<CompletionRecord>, Vec<CorpusError>), CorpusError> {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for item in records(open(path)?, path) {
        let (line, text) = item?;
        match parse_completion(line, &text) {
            Ok(r) => good.push(r),
            Err(e) => bad.push(e),
        }
    }
    Ok((good, bad))
}

pub fn write_completions<W: Write>(mut out: W, completions: &[CompletionRecord]) -> io::Result<()> {
    for c in completions {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrphanCompletion {
    pub task_id: String,
    pub model_id: String,
}

/// A completion superseded by a later one for the same task and model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateCompletion {
    pub task_id: String,
    pub model_id: String,
    pub superseded: usize,
}

#[derive(Debug, Clone)]
pub struct Joined<'a> {
    pub pairs: Vec<(&'a TaskRecord, &'a CompletionRecord)>,
    pub orphans: Vec<OrphanCompletion>,
    pub duplicates: Vec<DuplicateCompletion>,
}

/// Pairs each completion with its task, ordered by `(task_id, model_id)`.
///
/// Repeated `(task_id, model_id)` completions keep the last one in input
/// order; the rest are reported in `duplicates`. Completions naming an
/// absent task are reported in `orphans`.
pub fn join<'a>(tasks: &'a [TaskRecord], completions: &'a [CompletionRecord]) -> Joined<'a> {
    let by_id: HashMap<&str, &TaskRecord> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let mut latest: BTreeMap<(&str, &str), (&CompletionRecord, usize)> = BTreeMap::new();
    let mut orphans = Vec::new();
    for c in completions {
        if !by_id.contains_key(c.task_id.as_str()) {
            orphans.push(OrphanCompletion {
                task_id: c.task_id.clone(),
                model_id: c.model_id.clone(),
            });
            continue;
        }
        latest
            .entry((c.task_id.as_str(), c.model_id.as_str()))
            .and_modify(|slot| *slot = (c, slot.1 + 1))
            .or_insert((c, 0));
    }
    let mut duplicates = Vec::new();
    let pairs = latest
        .into_iter()
        .map(|((task_id, model_id), (c, superseded))| {
            if superseded > 0 {
                log::warn!("{superseded} earlier completion(s) for ({task_id}, {model_id}) replaced by the last one");
                duplicates.push(DuplicateCompletion {
                    task_id: task_id.to_string(),
                    model_id: model_id.to_string(),
                    superseded,
                });
            }
            (by_id[task_id], c)
        })
        .collect();
    Joined {
        pairs,
        orphans,
        duplicates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn task_line(id: &str, lang: &str) -> String {
        format!(
            r#"{{"task_id":"{id}","dataset":"bc","kind":"generation","prompt":"p","expected_language":"{lang}","source_language":null,"natural_language":"en"}}"#
        )
    }

    fn completion(task: &str, model: &str, response: &str) -> CompletionRecord {
        CompletionRecord {
            task_id: task.into(),
            model_id: model.into(),
            response: response.into(),
            temperature: 0.0,
            created_at: DateTime::parse_from_rfc3339("2025-01-01T00:00:00Z").unwrap(),
        }
    }

    fn task(id: &str) -> TaskRecord {
        TaskRecord {
            task_id: id.into(),
            dataset: "bc".into(),
            kind: TaskKind::Generation,
            prompt: "p".into(),
            expected_language: LanguageId::from_canonical("java"),
            source_language: None,
            natural_language: NaturalLanguageTag::new("en").unwrap(),
        }
    }

    #[test]
    fn loads_three_generation_tasks() {
        let f = tmp(&[&task_line("a", "java"), &task_line("b", "python"), &task_line("c", "go")]);
        let tasks = load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()).unwrap();
        assert_eq!(tasks.len(), 3);
        assert_eq!(tasks[1].task_id, "b");
    }

    #[test]
    fn alias_is_normalized_on_load() {
        let f = tmp(&[&task_line("a", "C++")]);
        let tasks = load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()).unwrap();
        assert_eq!(tasks[0].expected_language.as_str(), "cpp");
    }

    #[test]
    fn translation_without_source_is_malformed() {
        let line = r#"{"task_id":"t","dataset":"mc","kind":"translation","prompt":"p","expected_language":"java","source_language":null,"natural_language":"en"}"#;
        let f = tmp(&[&task_line("a", "java"), line]);
        let err = load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line: 2, .. }), "{err}");
    }

    #[test]
    fn generation_with_source_is_malformed() {
        let line = r#"{"task_id":"t","dataset":"mc","kind":"generation","prompt":"p","expected_language":"java","source_language":"python","natural_language":"en"}"#;
        let f = tmp(&[line]);
        assert!(matches!(
            load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()),
            Err(CorpusError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_task_and_unknown_language() {
        let f = tmp(&[&task_line("a", "java"), &task_line("a", "go")]);
        assert!(matches!(
            load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()),
            Err(CorpusError::DuplicateTaskId { line: 2, .. })
        ));
        let f = tmp(&[&task_line("a", "cobol")]);
        assert!(matches!(
            load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()),
            Err(CorpusError::UnknownLanguageName { line: Some(1), .. })
        ));
        let f = tmp(&[&task_line("a", "unknown")]);
        assert!(matches!(
            load_tasks(f.path(), RecordFormat::JsonLines, &LanguageRegistry::default()),
            Err(CorpusError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn completions_empty_and_missing_model() {
        let f = tmp(&[]);
        assert!(load_completions(f.path()).unwrap().is_empty());
        let f = tmp(&[r#"{"task_id":"a","response":"x","temperature":0.0,"created_at":"2025-01-01T00:00:00Z"}"#]);
        assert!(matches!(
            load_completions(f.path()),
            Err(CorpusError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn lenient_loader_keeps_good_lines() {
        let good = serde_json::to_string(&completion("a", "m", "x")).unwrap();
        let f = tmp(&[&good, "{not json", &good]);
        let (ok, bad) = load_completions_lenient(f.path()).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(bad.len(), 1);
    }

    #[test]
    fn join_reports_orphans() {
        let tasks = vec![task("a"), task("b"), task("c")];
        let comps = vec![completion("c", "m", ""), completion("a", "m", ""), completion("b", "m", "")];
        let j = join(&tasks, &comps);
        assert_eq!(j.pairs.len(), 3);
        assert_eq!(j.pairs[0].0.task_id, "a");
        assert!(j.orphans.is_empty());

        let comps = vec![completion("zzz", "m", "")];
        let j = join(&tasks, &comps);
        assert!(j.pairs.is_empty());
        assert_eq!(j.orphans.len(), 1);
    }

    #[test]
    fn join_two_models_same_task() {
        let tasks = vec![task("a")];
        let comps = vec![completion("a", "m2", ""), completion("a", "m1", "")];
        let j = join(&tasks, &comps);
        let ids: Vec<_> = j.pairs.iter().map(|(_, c)| c.model_id.as_str()).collect();
        assert_eq!(ids, ["m1", "m2"]);
    }

    #[test]
    fn join_duplicate_last_wins() {
        let tasks = vec![task("a")];
        let comps = vec![completion("a", "m", "first"), completion("a", "m", "second")];
        let j = join(&tasks, &comps);
        assert_eq!(j.pairs.len(), 1);
        assert_eq!(j.pairs[0].1.response, "second");
        assert_eq!(j.duplicates.len(), 1);
    }
}
