//! Per-sample evaluation: extract, detect, combine votes, parse, classify.
//!
//! Samples are independent, so a batch is mapped over a thread pool and
//! collected back in input order; the result does not depend on the number
//! of worker threads.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CompletionRecord, LanguageId, LanguageRegistry, TaskRecord};
use crate::detect::{
    consensus, run_detectors, validate_configs, ConsensusDecision, ConsensusParams, DetectError, Detector,
    DetectorConfig, DetectorUnavailable,
};
use crate::extract::{extract_code, fence_language_hint, ExtractError, ExtractedCode};
use crate::metrics::{classify_sample, MetricsError, SampleEvaluation};
use crate::parse::{GrammarRegistry, ParseError, ParseOutcome};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// Everything learned about one snippet, before it is tied to a task.
#[derive(Debug, Clone, PartialEq)]
pub struct SnippetAnalysis {
    pub extracted: Option<ExtractedCode>,
    pub fence_hint: Option<LanguageId>,
    pub decision: ConsensusDecision,
    pub unavailable: Vec<DetectorUnavailable>,
    pub parse: Option<ParseOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub task_id: String,
    pub model_id: String,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct EvaluationRun {
    pub evaluations: Vec<SampleEvaluation>,
    pub failures: Vec<SampleFailure>,
    /// Detector calls that went unanswered, summed over samples.
    pub unavailable_votes: usize,
}

pub struct Pipeline {
    registry: LanguageRegistry,
    ensemble: Vec<Arc<dyn Detector>>,
    configs: Vec<DetectorConfig>,
    params: ConsensusParams,
    grammars: GrammarRegistry,
}

impl Pipeline {
    pub fn new(
        registry: LanguageRegistry,
        ensemble: Vec<Arc<dyn Detector>>,
        configs: Vec<DetectorConfig>,
        params: ConsensusParams,
        grammars: GrammarRegistry,
    ) -> Result<Self, PipelineError> {
        if ensemble.is_empty() {
            return Err(DetectError::EmptyEnsemble.into());
        }
        validate_configs(&configs)?;
        let mut seen = HashSet::new();
        for d in &ensemble {
            if !seen.insert(d.id().to_string()) {
                return Err(DetectError::InvalidConfig(format!("detector `{}` appears twice", d.id())).into());
            }
            if !configs.iter().any(|c| c.detector_id == d.id()) {
                return Err(DetectError::MissingDetectorConfig(d.id().to_string()).into());
            }
        }
        for p in [params.margin, params.floor] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DetectError::InvalidConfig(format!("margin and floor must lie in [0, 1], got {p}")).into());
            }
        }
        Ok(Pipeline {
            registry,
            ensemble,
            configs,
            params,
            grammars,
        })
    }

    pub fn registry(&self) -> &LanguageRegistry {
        &self.registry
    }

    /// Runs extraction, detection, consensus and parsing on a raw response.
    pub fn analyze(&self, response: &str) -> Result<SnippetAnalysis, PipelineError> {
        let extracted = match extract_code(response) {
            Ok(e) => e,
            Err(ExtractError::NoCode) => {
                return Ok(SnippetAnalysis {
                    extracted: None,
                    fence_hint: None,
                    decision: ConsensusDecision::no_code(),
                    unavailable: Vec::new(),
                    parse: None,
                })
            }
        };
        let fence_hint = fence_language_hint(&extracted, &self.registry);
        let run = run_detectors(&extracted.code, &self.ensemble)?;
        let decision = consensus(&run.votes, &self.configs, self.params)?;
        let parse = if decision.label.is_unknown() {
            None
        } else {
            Some(self.grammars.validate_syntax(&extracted.code, &decision.label)?)
        };
        Ok(SnippetAnalysis {
            extracted: Some(extracted),
            fence_hint,
            decision,
            unavailable: run.unavailable,
            parse,
        })
    }

    pub fn evaluate_sample(
        &self,
        task: &TaskRecord,
        completion: &CompletionRecord,
        functional: Option<bool>,
    ) -> Result<(SampleEvaluation, usize), PipelineError> {
        let a = self.analyze(&completion.response)?;
        let mut eval = classify_sample(task, &completion.model_id, &a.decision, a.parse.as_ref(), functional)?;
        eval.extract_method = a.extracted.map(|e| e.method);
        Ok((eval, a.unavailable.len()))
    }

    /// Evaluates joined (task, completion) pairs on `jobs` threads. A sample
    /// that fails is reported and left out; the rest of the batch carries on.
    pub fn evaluate_all(
        &self,
        pairs: &[(&TaskRecord, &CompletionRecord)],
        functional: &BTreeMap<(String, String), bool>,
        jobs: usize,
    ) -> Result<EvaluationRun, PipelineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        let results: Vec<_> = pool.install(|| {
            pairs
                .par_iter()
                .map(|(task, completion)| {
                    let f = functional
                        .get(&(task.task_id.clone(), completion.model_id.clone()))
                        .copied();
                    self.evaluate_sample(task, completion, f)
                })
                .collect()
        });
        let mut run = EvaluationRun::default();
        for ((task, completion), r) in pairs.iter().zip(results) {
            match r {
                Ok((eval, unavailable)) => {
                    run.unavailable_votes += unavailable;
                    run.evaluations.push(eval);
                }
                Err(e) => {
                    log::error!("{} / {}: {e}", task.task_id, completion.model_id);
                    run.failures.push(SampleFailure {
                        task_id: task.task_id.clone(),
                        model_id: completion.model_id.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
        Ok(run)
    }
}
