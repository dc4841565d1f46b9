//! Weighted consensus over detector votes.
//!
//! Rules, in order:
//! 1. all votes agree: that label (`unanimous`), confidence = max vote confidence;
//! 2. otherwise score each label by `Σ weight · confidence` over its votes
//!    (weights renormalized over the detectors that answered); a lead of at
//!    least `margin` wins (`weighted`);
//! 3. a smaller lead defers to the highest-priority detector's label
//!    (`priority_tiebreak`);
//! 4. whatever was chosen, a confidence below `floor` turns the decision into
//!    `unknown` (`below_threshold_unknown`).

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{DetectError, DetectorVote};
use crate::corpus::LanguageId;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub detector_id: String,
    pub weight: f64,
    /// 1 is the highest priority.
    pub priority_rank: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    /// Minimum lead of the best label over the runner-up (τ).
    pub margin: f64,
    /// Minimum confidence of the chosen label (θ).
    pub floor: f64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams {
            margin: 0.05,
            floor: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusRule {
    Unanimous,
    Weighted,
    PriorityTiebreak,
    BelowThresholdUnknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusDecision {
    pub label: LanguageId,
    pub confidence: f64,
    /// Votes ordered by detector priority.
    pub votes: Vec<DetectorVote>,
    pub rule: ConsensusRule,
}

impl ConsensusDecision {
    /// Decision for a sample where no code could be found.
    pub fn no_code() -> Self {
        ConsensusDecision {
            label: LanguageId::unknown(),
            confidence: 0.0,
            votes: Vec::new(),
            rule: ConsensusRule::BelowThresholdUnknown,
        }
    }
}

/// Default weighting for detectors listed in priority order: the first gets
/// 0.4 and the rest share 0.6 equally (a lone detector gets 1.0).
pub fn default_configs<S: AsRef<str>>(ids_by_priority: &[S]) -> Vec<DetectorConfig> {
    let n = ids_by_priority.len();
    ids_by_priority
        .iter()
        .enumerate()
        .map(|(i, id)| DetectorConfig {
            detector_id: id.as_ref().to_string(),
            weight: match (n, i) {
                (1, _) => 1.0,
                (_, 0) => 0.4,
                _ => 0.6 / (n - 1) as f64,
            },
            priority_rank: i as u32 + 1,
        })
        .collect()
}

pub fn validate_configs(configs: &[DetectorConfig]) -> Result<(), DetectError> {
    let invalid = |m: String| Err(DetectError::InvalidConfig(m));
    if configs.is_empty() {
        return invalid("no detectors configured".into());
    }
    let mut ranks = HashSet::new();
    let mut ids = HashSet::new();
    for c in configs {
        if !(c.weight.is_finite() && c.weight >= 0.0) {
            return invalid(format!("weight of `{}` must be a nonnegative number", c.detector_id));
        }
        if c.priority_rank == 0 {
            return invalid(format!("priority of `{}` must be at least 1", c.detector_id));
        }
        if !ranks.insert(c.priority_rank) {
            return invalid(format!("priority {} used twice", c.priority_rank));
        }
        if !ids.insert(c.detector_id.as_str()) {
            return invalid(format!("detector `{}` configured twice", c.detector_id));
        }
    }
    let total: f64 = configs.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

pub fn consensus(
    votes: &[DetectorVote],
    configs: &[DetectorConfig],
    params: ConsensusParams,
) -> Result<ConsensusDecision, DetectError> {
    if votes.is_empty() {
        return Err(DetectError::NoVotes);
    }
    let mut ranked: Vec<(&DetectorConfig, &DetectorVote)> = votes
        .iter()
        .map(|v| {
            configs
                .iter()
                .find(|c| c.detector_id == v.detector_id)
                .map(|c| (c, v))
                .ok_or_else(|| DetectError::MissingDetectorConfig(v.detector_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    // canonical order makes the float sums below independent of input order
    ranked.sort_by(|a, b| {
        a.0.priority_rank
            .cmp(&b.0.priority_rank)
            .then_with(|| a.1.detector_id.cmp(&b.1.detector_id))
    });
    let ordered_votes: Vec<DetectorVote> = ranked.iter().map(|(_, v)| (*v).clone()).collect();

    let first = &ranked[0].1.label;
    let (label, confidence, rule) = if ranked.iter().all(|(_, v)| &v.label == first) {
        let max = ranked.iter().map(|(_, v)| v.confidence).fold(0.0, f64::max);
        (first.clone(), max, ConsensusRule::Unanimous)
    } else {
        let total_weight: f64 = ranked.iter().map(|(c, _)| c.weight).sum();
        let mut scores: BTreeMap<&LanguageId, f64> = BTreeMap::new();
        for (c, v) in &ranked {
            let w = if total_weight > 0.0 { c.weight / total_weight } else { 0.0 };
            *scores.entry(&v.label).or_insert(0.0) += w * v.confidence;
        }
        let mut by_score: Vec<(&LanguageId, f64)> = scores.iter().map(|(l, s)| (*l, *s)).collect();
        by_score.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (top, top_score) = by_score[0];
        let runner_up = by_score.get(1).map(|(_, s)| *s).unwrap_or(0.0);
        if top_score - runner_up + EPS >= params.margin {
            (top.clone(), top_score, ConsensusRule::Weighted)
        } else {
            let preferred = &ranked[0].1.label;
            (preferred.clone(), scores[preferred], ConsensusRule::PriorityTiebreak)
        }
    };

    if confidence + EPS < params.floor {
        return Ok(ConsensusDecision {
            label: LanguageId::unknown(),
            confidence: confidence.clamp(0.0, 1.0),
            votes: ordered_votes,
            rule: ConsensusRule::BelowThresholdUnknown,
        });
    }
    Ok(ConsensusDecision {
        label,
        confidence: confidence.clamp(0.0, 1.0),
        votes: ordered_votes,
        rule,
    })
}
