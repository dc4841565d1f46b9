//! External detector adapters.
//!
//! Subprocess: the snippet is written to the child's stdin; the child prints
//! one line `label<TAB>confidence`. HTTP: `POST {"code": ...}` answered by
//! `{"label": ..., "confidence": ...}`. Labels go through the registry, so
//! aliases are accepted and anything unrecognized becomes `unknown`.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{Detector, DetectorUnavailable, DetectorVote};
use crate::corpus::LanguageRegistry;

pub const DEFAULT_ADAPTER_TIMEOUT: Duration = Duration::from_secs(10);

fn make_vote(
    id: &str,
    registry: &LanguageRegistry,
    label: &str,
    confidence: f64,
) -> Result<DetectorVote, DetectorUnavailable> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(DetectorUnavailable {
            detector_id: id.to_string(),
            reason: format!("confidence {confidence} outside [0, 1]"),
        });
    }
    Ok(DetectorVote {
        detector_id: id.to_string(),
        label: registry.normalize_or_unknown(label),
        confidence,
    })
}

/// Runs a local command once per snippet.
#[derive(Debug, Clone)]
pub struct SubprocessDetector {
    id: String,
    program: String,
    args: Vec<String>,
    timeout: Duration,
    registry: LanguageRegistry,
}

impl SubprocessDetector {
    /// `command[0]` is the program, the rest are its arguments.
    pub fn new(id: impl Into<String>, command: &[String], registry: LanguageRegistry) -> Self {
        let (program, args) = match command.split_first() {
            Some((p, rest)) => (p.clone(), rest.to_vec()),
            None => (String::new(), Vec::new()),
        };
        SubprocessDetector {
            id: id.into(),
            program,
            args,
            timeout: DEFAULT_ADAPTER_TIMEOUT,
            registry,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn unavailable(&self, reason: impl Into<String>) -> DetectorUnavailable {
        DetectorUnavailable {
            detector_id: self.id.clone(),
            reason: reason.into(),
        }
    }

    fn run(&self, code: &str) -> Result<String, DetectorUnavailable> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| self.unavailable(format!("cannot start `{}`: {e}", self.program)))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let input = code.to_owned();
        let writer = thread::spawn(move || {
            // a child that exits without reading gives a broken pipe; its output still counts
            let _ = stdin.write_all(input.as_bytes());
        });
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = thread::spawn(move || {
            let mut out = String::new();
            stdout.read_to_string(&mut out).map(|_| out)
        });

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(self.unavailable(format!("timed out after {:?}", self.timeout)));
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(self.unavailable(e.to_string())),
            }
        };
        let _ = writer.join();
        let out = reader
            .join()
            .map_err(|_| self.unavailable("output reader panicked"))?
            .map_err(|e| self.unavailable(format!("reading output: {e}")))?;
        if !status.success() {
            return Err(self.unavailable(format!("exited with {status}")));
        }
        Ok(out)
    }
}

impl Detector for SubprocessDetector {
    fn id(&self) -> &str {
        &self.id
    }

    fn detect(&self, code: &str) -> Result<DetectorVote, DetectorUnavailable> {
        let out = self.run(code)?;
        let line = out.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let (label, conf) = line
            .split_once('\t')
            .ok_or_else(|| self.unavailable(format!("malformed output line {line:?}")))?;
        let conf: f64 = conf
            .trim()
            .parse()
            .map_err(|_| self.unavailable(format!("malformed confidence {conf:?}")))?;
        make_vote(&self.id, &self.registry, label.trim(), conf)
    }
}

#[derive(Deserialize)]
struct HttpReply {
    label: String,
    confidence: f64,
}

/// Posts each snippet to an HTTP endpoint.
#[derive(Debug, Clone)]
pub struct HttpDetector {
    id: String,
    url: String,
    agent: ureq::Agent,
    registry: LanguageRegistry,
}

impl HttpDetector {
    pub fn new(id: impl Into<String>, url: impl Into<String>, registry: LanguageRegistry) -> Self {
        Self::with_timeout(id, url, registry, DEFAULT_ADAPTER_TIMEOUT)
    }

    pub fn with_timeout(
        id: impl Into<String>,
        url: impl Into<String>,
        registry: LanguageRegistry,
        timeout: Duration,
    ) -> Self {
        HttpDetector {
            id: id.into(),
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            registry,
        }
    }

    fn unavailable(&self, reason: impl Into<String>) -> DetectorUnavailable {
        DetectorUnavailable {
            detector_id: self.id.clone(),
            reason: reason.into(),
        }
    }
}

impl Detector for HttpDetector {
    fn id(&self) -> &str {
        &self.id
    }

    fn detect(&self, code: &str) -> Result<DetectorVote, DetectorUnavailable> {
        let reply = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({ "code": code }))
            .map_err(|e| match e {
                ureq::Error::Status(status, _) => self.unavailable(format!("HTTP {status}")),
                ureq::Error::Transport(t) => self.unavailable(t.to_string()),
            })?;
        let body: HttpReply = reply
            .into_json()
            .map_err(|e| self.unavailable(format!("bad response body: {e}")))?;
        make_vote(&self.id, &self.registry, &body.label, body.confidence)
    }
}
