//! Run configuration, read from a TOML file. Relative paths inside the file
//! resolve against the file's directory; command-line flags override it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use plc_core::corpus::LanguageRegistry;
use plc_core::detect::{
    default_configs, validate_configs, ConsensusParams, Detector, DetectorConfig, HeuristicDetector, HttpDetector,
    InFlightLimited, SubprocessDetector, DEFAULT_ADAPTER_TIMEOUT, HEURISTIC_DETECTOR_ID,
};
use plc_core::infer::{GenerationParams, ModelEndpoint};
use plc_core::metrics::UnknownPolicy;
use plc_core::parse::GrammarRegistry;
use plc_core::pipeline::Pipeline;
use plc_core::report::{ReportFormat, CONFUSION_TABLE_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Heuristic,
    Subprocess,
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorEntry {
    pub id: String,
    pub kind: DetectorKind,
    /// Omit on every detector to get the default weighting.
    pub weight: Option<f64>,
    pub priority: u32,
    /// Program and arguments for `subprocess` detectors.
    #[serde(default)]
    pub command: Vec<String>,
    /// Endpoint for `http` detectors.
    pub url: Option<String>,
    pub timeout_secs: Option<f64>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub margin: f64,
    pub floor: f64,
    pub detectors: Vec<DetectorEntry>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let p = ConsensusParams::default();
        EnsembleConfig {
            margin: p.margin,
            floor: p.floor,
            detectors: vec![DetectorEntry {
                id: HEURISTIC_DETECTOR_ID.to_string(),
                kind: DetectorKind::Heuristic,
                weight: None,
                priority: 1,
                command: Vec::new(),
                url: None,
                timeout_secs: None,
                max_in_flight: None,
            }],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub columns: Vec<String>,
    pub percent_precision: u32,
    pub format: ReportFormat,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            columns: CONFUSION_TABLE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            percent_precision: 2,
            format: ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Language registry JSON; the bundled registry when absent.
    pub registry: Option<PathBuf>,
    /// TOML table of `language = "builtin:<name>" | "<path to grammar library>"`;
    /// all bundled grammars when absent.
    pub grammar_registry: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub unknown_policy: UnknownPolicy,
    pub ensemble: EnsembleConfig,
    pub endpoints: Vec<ModelEndpoint>,
    pub generation: GenerationParams,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            registry: None,
            grammar_registry: None,
            cache_dir: None,
            out_dir: PathBuf::from("out"),
            jobs: 1,
            unknown_policy: UnknownPolicy::Include,
            ensemble: EnsembleConfig::default(),
            endpoints: Vec::new(),
            generation: GenerationParams::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.registry.as_mut().map(rebase);
        cfg.grammar_registry.as_mut().map(rebase);
        cfg.cache_dir.as_mut().map(rebase);
        rebase(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        for (name, v) in [("margin", self.ensemble.margin), ("floor", self.ensemble.floor)] {
            if !(0.0..=1.0).contains(&v) {
                bail!("ensemble {name} must lie in [0, 1], got {v}");
            }
        }
        validate_configs(&self.detector_configs()?)?;
        for e in &self.endpoints {
            if e.max_in_flight == 0 {
                bail!("endpoint {}: max_in_flight must be at least 1", e.model_id);
            }
        }
        Ok(())
    }

    pub fn language_registry(&self) -> Result<LanguageRegistry> {
        match &self.registry {
            Some(p) => Ok(LanguageRegistry::load(p)?),
            None => Ok(LanguageRegistry::default()),
        }
    }

    pub fn grammars(&self) -> Result<GrammarRegistry> {
        let Some(path) = &self.grammar_registry else {
            return Ok(GrammarRegistry::builtin());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading grammar registry {}", path.display()))?;
        let locations: BTreeMap<String, String> =
            toml::from_str(&text).with_context(|| format!("parsing grammar registry {}", path.display()))?;
        Ok(GrammarRegistry::from_locations(
            &locations,
            path.parent().unwrap_or(Path::new(".")),
        )?)
    }

    /// Detector weights and priorities. Weights are either given for every
    /// detector or for none, in which case the defaults apply by priority.
    pub fn detector_configs(&self) -> Result<Vec<DetectorConfig>> {
        let mut entries: Vec<&DetectorEntry> = self.ensemble.detectors.iter().collect();
        if entries.is_empty() {
            bail!("the ensemble has no detectors");
        }
        entries.sort_by_key(|e| e.priority);
        let given = entries.iter().filter(|e| e.weight.is_some()).count();
        if given == 0 {
            let ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
            let mut configs = default_configs(&ids);
            for (c, e) in configs.iter_mut().zip(&entries) {
                c.priority_rank = e.priority;
            }
            return Ok(configs);
        }
        if given != entries.len() {
            bail!("give a weight for every detector or for none");
        }
        Ok(entries
            .iter()
            .map(|e| DetectorConfig {
                detector_id: e.id.clone(),
                weight: e.weight.unwrap(),
                priority_rank: e.priority,
            })
            .collect())
    }

    /// Detector instances in priority order.
    pub fn ensemble(&self, registry: &LanguageRegistry) -> Result<Vec<Arc<dyn Detector>>> {
        let mut entries: Vec<&DetectorEntry> = self.ensemble.detectors.iter().collect();
        entries.sort_by_key(|e| e.priority);
        let mut out: Vec<Arc<dyn Detector>> = Vec::new();
        for e in entries {
            let timeout = e.timeout_secs.map_or(DEFAULT_ADAPTER_TIMEOUT, Duration::from_secs_f64);
            let detector: Arc<dyn Detector> = match e.kind {
                DetectorKind::Heuristic => {
                    if e.id != HEURISTIC_DETECTOR_ID {
                        bail!("the heuristic detector must have id `{HEURISTIC_DETECTOR_ID}`");
                    }
                    Arc::new(HeuristicDetector::new(registry))
                }
                DetectorKind::Subprocess => {
                    if e.command.is_empty() {
                        bail!("subprocess detector `{}` needs a command", e.id);
                    }
                    Arc::new(SubprocessDetector::new(&e.id, &e.command, registry.clone()).with_timeout(timeout))
                }
                DetectorKind::Http => {
                    let Some(url) = &e.url else {
                        bail!("http detector `{}` needs a url", e.id);
                    };
                    Arc::new(HttpDetector::with_timeout(&e.id, url, registry.clone(), timeout))
                }
            };
            out.push(match e.max_in_flight {
                Some(n) => Arc::new(InFlightLimited::new(detector, n)),
                None => detector,
            });
        }
        Ok(out)
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        self.validate()?;
        let registry = self.language_registry()?;
        let ensemble = self.ensemble(&registry)?;
        Ok(Pipeline::new(
            registry,
            ensemble,
            self.detector_configs()?,
            ConsensusParams {
                margin: self.ensemble.margin,
                floor: self.ensemble.floor,
            },
            self.grammars()?,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.detector_configs().unwrap()[0].weight, 1.0);
        c.pipeline().unwrap();
    }

    #[test]
    fn full_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
jobs = 4
out_dir = "results"
cache_dir = "cache"

[ensemble]
margin = 0.05
floor = 0.1

[[ensemble.detectors]]
id = "primary"
kind = "http"
url = "http://127.0.0.1:9/detect"
priority = 1

[[ensemble.detectors]]
id = "heuristic"
kind = "heuristic"
priority = 2

[[ensemble.detectors]]
id = "script"
kind = "subprocess"
command = ["sh", "-c", "printf 'go\t1\n'"]
priority = 3
max_in_flight = 2

[[endpoints]]
model_id = "llama3"
base_url = "http://localhost:11434/v1"

[generation]
max_tokens = 512

[report]
percent_precision = 1
"#,
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        c.validate().unwrap();
        assert_eq!(c.out_dir, dir.path().join("results"));
        let w: Vec<f64> = c.detector_configs().unwrap().iter().map(|d| d.weight).collect();
        assert_eq!(w[0], 0.4);
        assert!((w[1] - 0.3).abs() < 1e-12);
        assert_eq!(c.generation.temperature, 0.0);
        assert_eq!(c.endpoints[0].max_in_flight, 4);
        let ensemble = c.ensemble(&LanguageRegistry::default()).unwrap();
        let ids: Vec<_> = ensemble.iter().map(|d| d.id().to_string()).collect();
        assert_eq!(ids, ["primary", "heuristic", "script"]);
    }

    #[test]
    fn bad_weights_rejected() {
        let c: RunConfig = toml::from_str(
            r#"
[[ensemble.detectors]]
id = "heuristic"
kind = "heuristic"
priority = 1
weight = 0.7
"#,
        )
        .unwrap();
        assert!(c.validate().is_err());
        assert!(toml::from_str::<RunConfig>("jobs = 1\nbogus = 3").is_err());
    }
}
