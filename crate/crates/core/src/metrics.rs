//! Sample classification and the confusion metrics: LCPR, CPPR, DMR, FPR.
//!
//! Everything is counted in integers first and divided once. A sample is
//! confused when its detected language differs from the expected one, and an
//! `unknown` detection is confused too.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LanguageId, NaturalLanguageTag, TaskKind, TaskRecord};
use crate::detect::{ConsensusDecision, ConsensusRule};
use crate::extract::ExtractionMethod;
use crate::parse::ParseOutcome;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("parse outcome is for `{parsed}` but the detected language is `{detected}`")]
    ParseLanguageMismatch { parsed: LanguageId, detected: LanguageId },
    #[error("no samples")]
    EmptySlice,
    #[error("no confused samples")]
    NoConfusedSamples,
    #[error("sample {task_id} / {model_id} has no functional result")]
    MissingFunctionalResult { task_id: String, model_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvaluation {
    pub task_id: String,
    pub model_id: String,
    pub dataset: String,
    pub kind: TaskKind,
    pub expected: LanguageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_language: Option<LanguageId>,
    pub detected: LanguageId,
    pub confidence: f64,
    pub rule: ConsensusRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract_method: Option<ExtractionMethod>,
    pub confused: bool,
    pub parse_ok: bool,
    #[serde(default)]
    pub functional_pass: Option<bool>,
    pub natural_language: NaturalLanguageTag,
}

pub fn classify_sample(
    task: &TaskRecord,
    model_id: &str,
    decision: &ConsensusDecision,
    parse: Option<&ParseOutcome>,
    functional: Option<bool>,
) -> Result<SampleEvaluation, MetricsError> {
    if let Some(p) = parse {
        if p.language != decision.label {
            return Err(MetricsError::ParseLanguageMismatch {
                parsed: p.language.clone(),
                detected: decision.label.clone(),
            });
        }
    }
    let detected = decision.label.clone();
    Ok(SampleEvaluation {
        task_id: task.task_id.clone(),
        model_id: model_id.to_string(),
        dataset: task.dataset.clone(),
        kind: task.kind,
        expected: task.expected_language.clone(),
        source_language: task.source_language.clone(),
        confused: detected != task.expected_language,
        parse_ok: !detected.is_unknown() && parse.is_some_and(|p| p.ok),
        detected,
        confidence: decision.confidence,
        rule: decision.rule,
        extract_method: None,
        functional_pass: functional,
        natural_language: task.natural_language.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Confused,
    Nonconfused,
    All,
}

impl Partition {
    fn contains(self, s: &SampleEvaluation) -> bool {
        match self {
            Partition::Confused => s.confused,
            Partition::Nonconfused => !s.confused,
            Partition::All => true,
        }
    }
}

/// Whether `unknown` detections take part in DMR. They are always confused
/// for LCPR; excluding them only removes them from DMR numerators and the
/// DMR denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownPolicy {
    #[default]
    Include,
    Exclude,
}

/// An exact ratio of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    /// `None` for an empty denominator.
    pub fn new(num: u64, den: u64) -> Option<Ratio> {
        (den > 0).then_some(Ratio { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub fn lcpr(samples: &[SampleEvaluation]) -> Result<f64, MetricsError> {
    let correct = samples.iter().filter(|s| !s.confused).count() as u64;
    Ratio::new(correct, samples.len() as u64)
        .map(Ratio::value)
        .ok_or(MetricsError::EmptySlice)
}

/// `None` when the partition is empty.
pub fn cppr(samples: &[SampleEvaluation], partition: Partition) -> Option<f64> {
    let (ok, n) = samples
        .iter()
        .filter(|s| partition.contains(s))
        .fold((0u64, 0u64), |(ok, n), s| (ok + s.parse_ok as u64, n + 1));
    Ratio::new(ok, n).map(Ratio::value)
}

pub fn dmr(samples: &[SampleEvaluation], destination: &LanguageId) -> Result<f64, MetricsError> {
    dmr_with_policy(samples, destination, UnknownPolicy::Include)
}

pub fn dmr_with_policy(
    samples: &[SampleEvaluation],
    destination: &LanguageId,
    policy: UnknownPolicy,
) -> Result<f64, MetricsError> {
    let counted = |s: &&SampleEvaluation| {
        s.confused && (policy == UnknownPolicy::Include || !s.detected.is_unknown())
    };
    let den = samples.iter().filter(counted).count() as u64;
    let num = samples
        .iter()
        .filter(counted)
        .filter(|s| &s.detected == destination)
        .count() as u64;
    Ratio::new(num, den)
        .map(Ratio::value)
        .ok_or(MetricsError::NoConfusedSamples)
}

/// `Ok(None)` when the partition is empty.
pub fn fpr(samples: &[SampleEvaluation], partition: Partition) -> Result<Option<f64>, MetricsError> {
    let mut pass = 0u64;
    let mut n = 0u64;
    for s in samples.iter().filter(|s| partition.contains(s)) {
        match s.functional_pass {
            Some(p) => pass += p as u64,
            None => {
                return Err(MetricsError::MissingFunctionalResult {
                    task_id: s.task_id.clone(),
                    model_id: s.model_id.clone(),
                })
            }
        }
        n += 1;
    }
    Ok(Ratio::new(pass, n).map(Ratio::value))
}

/// Integer tallies for one group of samples. Tallies merge by addition, so
/// groups can be combined without touching rates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub n_total: u64,
    pub n_confused: u64,
    pub parse_ok_nonconfused: u64,
    pub parse_ok_confused: u64,
    /// Confused samples per detected language.
    pub destinations: BTreeMap<LanguageId, u64>,
    pub functional_known_nonconfused: u64,
    pub functional_known_confused: u64,
    pub functional_pass_nonconfused: u64,
    pub functional_pass_confused: u64,
}

impl GroupCounts {
    pub fn add(&mut self, s: &SampleEvaluation) {
        self.n_total += 1;
        if s.confused {
            self.n_confused += 1;
            self.parse_ok_confused += s.parse_ok as u64;
            *self.destinations.entry(s.detected.clone()).or_insert(0) += 1;
            if let Some(p) = s.functional_pass {
                self.functional_known_confused += 1;
                self.functional_pass_confused += p as u64;
            }
        } else {
            self.parse_ok_nonconfused += s.parse_ok as u64;
            if let Some(p) = s.functional_pass {
                self.functional_known_nonconfused += 1;
                self.functional_pass_nonconfused += p as u64;
            }
        }
    }

    pub fn merge(&mut self, other: &GroupCounts) {
        self.n_total += other.n_total;
        self.n_confused += other.n_confused;
        self.parse_ok_nonconfused += other.parse_ok_nonconfused;
        self.parse_ok_confused += other.parse_ok_confused;
        for (lang, n) in &other.destinations {
            *self.destinations.entry(lang.clone()).or_insert(0) += n;
        }
        self.functional_known_nonconfused += other.functional_known_nonconfused;
        self.functional_known_confused += other.functional_known_confused;
        self.functional_pass_nonconfused += other.functional_pass_nonconfused;
        self.functional_pass_confused += other.functional_pass_confused;
    }

    pub fn n_nonconfused(&self) -> u64 {
        self.n_total - self.n_confused
    }

    pub fn lcpr(&self) -> Option<Ratio> {
        Ratio::new(self.n_nonconfused(), self.n_total)
    }

    pub fn cppr_nonconfused(&self) -> Option<Ratio> {
        Ratio::new(self.parse_ok_nonconfused, self.n_nonconfused())
    }

    pub fn cppr_confused(&self) -> Option<Ratio> {
        Ratio::new(self.parse_ok_confused, self.n_confused)
    }

    /// Present only when every sample in the partition has a result.
    pub fn fpr_nonconfused(&self) -> Option<Ratio> {
        (self.functional_known_nonconfused == self.n_nonconfused())
            .then(|| Ratio::new(self.functional_pass_nonconfused, self.n_nonconfused()))
            .flatten()
    }

    pub fn fpr_confused(&self) -> Option<Ratio> {
        (self.functional_known_confused == self.n_confused)
            .then(|| Ratio::new(self.functional_pass_confused, self.n_confused))
            .flatten()
    }

    /// Most frequent destination of confused samples (ties go to the
    /// lexicographically smallest name) with its share.
    pub fn dominant(&self, policy: UnknownPolicy) -> Option<(LanguageId, Ratio)> {
        let eligible = |l: &LanguageId| policy == UnknownPolicy::Include || !l.is_unknown();
        let den: u64 = self
            .destinations
            .iter()
            .filter(|(l, _)| eligible(l))
            .map(|(_, n)| n)
            .sum();
        let mut best: Option<(&LanguageId, u64)> = None;
        // BTreeMap iterates in name order, so strict > keeps the smallest name on ties
        for (lang, &n) in self.destinations.iter().filter(|(l, _)| eligible(l)) {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((lang, n));
            }
        }
        let (lang, n) = best?;
        Ratio::new(n, den).map(|r| (lang.clone(), r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub model_id: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nl_bucket: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    /// One group per (model, dataset).
    ModelDataset,
    /// Split further by the natural-language tag of the prompt.
    ModelDatasetNl,
    /// Split into `English` and `Non-English` buckets.
    ModelDatasetEnglish,
}

pub const ENGLISH_BUCKET: &str = "English";
pub const NON_ENGLISH_BUCKET: &str = "Non-English";
pub const ALL_BUCKET: &str = "All";

impl GroupBy {
    pub fn key(self, s: &SampleEvaluation) -> GroupKey {
        let nl_bucket = match self {
            GroupBy::ModelDataset => None,
            GroupBy::ModelDatasetNl => Some(s.natural_language.as_str().to_string()),
            GroupBy::ModelDatasetEnglish => Some(
                if s.natural_language.is_english() { ENGLISH_BUCKET } else { NON_ENGLISH_BUCKET }.to_string(),
            ),
        };
        GroupKey {
            model_id: s.model_id.clone(),
            dataset: s.dataset.clone(),
            nl_bucket,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantMigration {
    pub language: LanguageId,
    pub count: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub group: GroupKey,
    pub n_total: u64,
    pub n_confused: u64,
    /// `None` only for an empty group.
    pub lcpr: Option<f64>,
    pub cppr_nonconfused: Option<f64>,
    pub cppr_confused: Option<f64>,
    pub dmr_dominant: Option<DominantMigration>,
    pub fpr_nonconfused: Option<f64>,
    pub fpr_confused: Option<f64>,
    pub counts: GroupCounts,
    pub unknown_policy: UnknownPolicy,
}

impl MetricsSummary {
    pub fn from_counts(group: GroupKey, counts: GroupCounts, policy: UnknownPolicy) -> Self {
        let dmr_dominant = counts.dominant(policy).map(|(language, r)| DominantMigration {
            language,
            count: r.num,
            rate: r.value(),
        });
        MetricsSummary {
            group,
            n_total: counts.n_total,
            n_confused: counts.n_confused,
            lcpr: counts.lcpr().map(Ratio::value),
            cppr_nonconfused: counts.cppr_nonconfused().map(Ratio::value),
            cppr_confused: counts.cppr_confused().map(Ratio::value),
            dmr_dominant,
            fpr_nonconfused: counts.fpr_nonconfused().map(Ratio::value),
            fpr_confused: counts.fpr_confused().map(Ratio::value),
            counts,
            unknown_policy: policy,
        }
    }

    /// DMR denominator under this summary's policy.
    pub fn dmr_denominator(&self) -> u64 {
        self.counts
            .destinations
            .iter()
            .filter(|(l, _)| self.unknown_policy == UnknownPolicy::Include || !l.is_unknown())
            .map(|(_, n)| n)
            .sum()
    }
}

pub fn group_counts<'a, I>(samples: I, group_by: GroupBy) -> BTreeMap<GroupKey, GroupCounts>
where
    I: IntoIterator<Item = &'a SampleEvaluation>,
{
    let mut groups: BTreeMap<GroupKey, GroupCounts> = BTreeMap::new();
    for s in samples {
        groups.entry(group_by.key(s)).or_default().add(s);
    }
    groups
}

/// One summary per group, sorted by group key.
pub fn summarize(samples: &[SampleEvaluation], group_by: GroupBy) -> Vec<MetricsSummary> {
    summarize_with_policy(samples, group_by, UnknownPolicy::Include)
}

pub fn summarize_with_policy(
    samples: &[SampleEvaluation],
    group_by: GroupBy,
    policy: UnknownPolicy,
) -> Vec<MetricsSummary> {
    group_counts(samples, group_by)
        .into_iter()
        .map(|(k, c)| MetricsSummary::from_counts(k, c, policy))
        .collect()
}
