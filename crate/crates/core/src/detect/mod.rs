//! Programming-language identification: detectors, the ensemble runner and
//! weighted consensus.

mod adapter;
mod consensus;
mod heuristic;

pub use adapter::{HttpDetector, SubprocessDetector, DEFAULT_ADAPTER_TIMEOUT};
pub use consensus::{
    consensus, default_configs, validate_configs, ConsensusDecision, ConsensusParams, ConsensusRule,
    DetectorConfig,
};
pub use heuristic::{
    covered_languages, detect_heuristic, language_scores, HeuristicDetector, DEFAULT_SCORE_FLOOR,
    HEURISTIC_DETECTOR_ID,
};

use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LanguageId;

/// One detector's opinion about a snippet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorVote {
    pub detector_id: String,
    pub label: LanguageId,
    pub confidence: f64,
}

/// A detector that did not answer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("detector `{detector_id}` unavailable: {reason}")]
pub struct DetectorUnavailable {
    pub detector_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("detector ensemble is empty")]
    EmptyEnsemble,
    #[error("no detector produced a vote ({} unavailable)", .0.len())]
    AllDetectorsUnavailable(Vec<DetectorUnavailable>),
    #[error("no votes to combine")]
    NoVotes,
    #[error("no configuration for detector `{0}`")]
    MissingDetectorConfig(String),
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
}

pub trait Detector: Send + Sync {
    fn id(&self) -> &str;
    fn detect(&self, code: &str) -> Result<DetectorVote, DetectorUnavailable>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRun {
    /// Votes in ensemble order, unresponsive detectors omitted.
    pub votes: Vec<DetectorVote>,
    pub unavailable: Vec<DetectorUnavailable>,
}

pub fn run_detectors(code: &str, ensemble: &[Arc<dyn Detector>]) -> Result<DetectorRun, DetectError> {
    if ensemble.is_empty() {
        return Err(DetectError::EmptyEnsemble);
    }
    let mut votes = Vec::with_capacity(ensemble.len());
    let mut unavailable = Vec::new();
    for detector in ensemble {
        match detector.detect(code) {
            Ok(vote) => votes.push(vote),
            Err(e) => {
                log::warn!("{e}");
                unavailable.push(e);
            }
        }
    }
    if votes.is_empty() {
        return Err(DetectError::AllDetectorsUnavailable(unavailable));
    }
    Ok(DetectorRun { votes, unavailable })
}

/// Counting semaphore capping concurrent calls into one adapter.
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Wraps a detector so at most `max_in_flight` calls run at once.
pub struct InFlightLimited {
    inner: Arc<dyn Detector>,
    sem: Semaphore,
}

impl InFlightLimited {
    pub fn new(inner: Arc<dyn Detector>, max_in_flight: usize) -> Self {
        InFlightLimited {
            inner,
            sem: Semaphore {
                free: Mutex::new(max_in_flight.max(1)),
                cv: Condvar::new(),
            },
        }
    }
}

impl Detector for InFlightLimited {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn detect(&self, code: &str) -> Result<DetectorVote, DetectorUnavailable> {
        let _permit = self.sem.acquire();
        self.inner.detect(code)
    }
}
