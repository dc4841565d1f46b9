//! Subcommand implementations. Each returns whether the run was complete or
//! partial; fatal problems come back as errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use plc_core::corpus::{self, CompletionRecord, RecordFormat};
use plc_core::infer::{Generator, ResponseCache};
use plc_core::metrics::{group_counts, GroupBy, GroupKey, MetricsSummary, SampleEvaluation};
use plc_core::migrate::{build_grouped, build_matrix_on, emit_chord, MatrixAxis};
use plc_core::report::{render, render_matrix, render_nl_breakdown, report_file_name, ReportFormat, ReportSpec};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Partial,
}

impl Outcome {
    fn from_problems(n: usize) -> Self {
        if n == 0 {
            Outcome::Complete
        } else {
            Outcome::Partial
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn generate(cfg: &RunConfig, tasks_path: &Path, models: &[String], output: Option<PathBuf>) -> Result<Outcome> {
    let registry = cfg.language_registry()?;
    let tasks = corpus::load_tasks(tasks_path, RecordFormat::JsonLines, &registry)?;
    let endpoints: Vec<_> = cfg
        .endpoints
        .iter()
        .filter(|e| models.is_empty() || models.contains(&e.model_id))
        .collect();
    if endpoints.is_empty() {
        bail!("no model endpoints configured{}", if models.is_empty() { "" } else { " for the requested models" });
    }
    let cache = cfg.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for endpoint in endpoints {
        let generator = Generator::new(endpoint.clone(), cfg.generation.clone(), cache.clone())?;
        let run = generator.generate_corpus(&tasks);
        records.extend(run.records);
        failures.extend(run.failures.into_iter().map(|f| (endpoint.model_id.clone(), f)));
    }
    records.sort_by(|a: &CompletionRecord, b| (&a.task_id, &a.model_id).cmp(&(&b.task_id, &b.model_id)));
    let out = output.unwrap_or_else(|| cfg.out_dir.join("completions.jsonl"));
    write_jsonl(&out, &records)?;
    println!("{}", out.display());
    if !failures.is_empty() {
        #[derive(Serialize)]
        struct Failure<'a> {
            model_id: &'a str,
            task_id: &'a str,
            error: &'a str,
        }
        let rows: Vec<_> = failures
            .iter()
            .map(|(m, f)| Failure {
                model_id: m,
                task_id: &f.task_id,
                error: &f.error,
            })
            .collect();
        let path = out.with_file_name("generation_failures.jsonl");
        write_jsonl(&path, &rows)?;
        eprintln!("{} of {} requests failed; see {}", failures.len(), failures.len() + records.len(), path.display());
    }
    Ok(Outcome::from_problems(failures.len()))
}

#[derive(Debug, Deserialize)]
struct FunctionalResult {
    task_id: String,
    model_id: String,
    passed: bool,
}

fn load_functional(path: &Path) -> Result<BTreeMap<(String, String), bool>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: FunctionalResult =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed result", path.display(), i + 1))?;
        out.insert((r.task_id, r.model_id), r.passed);
    }
    Ok(out)
}

pub fn evaluate(
    cfg: &RunConfig,
    tasks_path: &Path,
    completions_path: &Path,
    functional_path: Option<&Path>,
    output: Option<PathBuf>,
) -> Result<Outcome> {
    let pipeline = cfg.pipeline()?;
    let tasks = corpus::load_tasks(tasks_path, RecordFormat::JsonLines, pipeline.registry())?;
    let (completions, bad_lines) = corpus::load_completions_lenient(completions_path)?;
    for e in &bad_lines {
        log::warn!("skipped: {e}");
    }
    let functional = functional_path.map(load_functional).transpose()?.unwrap_or_default();
    let joined = corpus::join(&tasks, &completions);
    for o in &joined.orphans {
        log::warn!("completion for unknown task {} ({}) ignored", o.task_id, o.model_id);
    }
    let run = pipeline.evaluate_all(&joined.pairs, &functional, cfg.jobs)?;
    let out = output.unwrap_or_else(|| cfg.out_dir.join("evaluations.jsonl"));
    write_jsonl(&out, &run.evaluations)?;
    if run.unavailable_votes > 0 {
        log::warn!("{} detector calls went unanswered", run.unavailable_votes);
    }
    println!("{}", out.display());
    let problems = bad_lines.len() + joined.orphans.len() + run.failures.len();
    if problems > 0 {
        eprintln!(
            "{} malformed lines, {} orphan completions, {} failed samples",
            bad_lines.len(),
            joined.orphans.len(),
            run.failures.len()
        );
    }
    Ok(Outcome::from_problems(problems))
}

pub fn load_evaluations(path: &Path) -> Result<Vec<SampleEvaluation>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: malformed evaluation", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub struct ReportOptions {
    pub format: ReportFormat,
    pub precision: u32,
    pub columns: Vec<String>,
    pub chord: bool,
}

/// Writes every report file and returns their paths in writing order.
pub fn write_reports(
    evaluations: &[SampleEvaluation],
    cfg: &RunConfig,
    opts: &ReportOptions,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let models: Vec<&str> = evaluations.iter().map(|e| e.model_id.as_str()).collect();
    let datasets: Vec<&str> = evaluations.iter().map(|e| e.dataset.as_str()).collect();
    let name = |report: &str, format| match (datasets.is_empty(), models.is_empty()) {
        (false, false) => report_file_name(&datasets, &models, report, format),
        _ => report_file_name(&["all"], &["all"], report, format),
    };
    let summaries = |group_by| -> Vec<MetricsSummary> {
        group_counts(evaluations, group_by)
            .into_iter()
            .map(|(k, c)| MetricsSummary::from_counts(k, c, cfg.unknown_policy))
            .collect()
    };
    let mut written = Vec::new();
    let mut put = |path: PathBuf, text: String| -> Result<()> {
        let mut w = create(&path)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        written.push(path);
        Ok(())
    };

    let spec = ReportSpec {
        format: opts.format,
        columns: opts.columns.clone(),
        grouping: GroupBy::ModelDataset,
        percent_precision: opts.precision,
    };
    put(out_dir.join(name("summary", opts.format)), render(&summaries(GroupBy::ModelDataset), &spec)?)?;

    let nl_spec = ReportSpec {
        grouping: GroupBy::ModelDatasetEnglish,
        ..spec.clone()
    };
    put(
        out_dir.join(name("nl", opts.format)),
        render_nl_breakdown(&summaries(GroupBy::ModelDatasetEnglish), &nl_spec)?,
    )?;

    for (axis, suffix) in [(MatrixAxis::Target, ""), (MatrixAxis::Source, "-source")] {
        for (key, matrix) in build_grouped(evaluations, GroupBy::ModelDataset, axis) {
            let stem = |report: &str, format| {
                report_file_name(&[key.dataset.as_str()], &[key.model_id.as_str()], report, format)
            };
            put(
                out_dir.join(stem(&format!("matrix{suffix}"), opts.format)),
                render_matrix(&matrix, opts.format),
            )?;
            if opts.chord {
                let doc = emit_chord(&matrix, key.clone(), false);
                put(
                    out_dir.join(stem(&format!("chord{suffix}"), ReportFormat::Json)),
                    serde_json::to_string_pretty(&doc)? + "\n",
                )?;
            }
        }
    }
    Ok(written)
}

pub fn report(cfg: &RunConfig, evaluations_path: &Path, opts: &ReportOptions) -> Result<Outcome> {
    let evaluations = load_evaluations(evaluations_path)?;
    for path in write_reports(&evaluations, cfg, opts, &cfg.out_dir)? {
        println!("{}", path.display());
    }
    Ok(Outcome::Complete)
}

pub fn matrix(
    evaluations_path: &Path,
    axis: MatrixAxis,
    models: &[String],
    datasets: &[String],
    chord: bool,
    include_diagonal: bool,
    format: ReportFormat,
) -> Result<Outcome> {
    let evaluations: Vec<_> = load_evaluations(evaluations_path)?
        .into_iter()
        .filter(|e| models.is_empty() || models.contains(&e.model_id))
        .filter(|e| datasets.is_empty() || datasets.contains(&e.dataset))
        .collect();
    let m = build_matrix_on(&evaluations, axis);
    let label = |values: BTreeSet<&str>| match values.len() {
        1 => values.into_iter().next().unwrap().to_string(),
        _ => "all".to_string(),
    };
    let text = if chord {
        let key = GroupKey {
            model_id: label(evaluations.iter().map(|e| e.model_id.as_str()).collect()),
            dataset: label(evaluations.iter().map(|e| e.dataset.as_str()).collect()),
            nl_bucket: None,
        };
        serde_json::to_string_pretty(&emit_chord(&m, key, include_diagonal))? + "\n"
    } else {
        render_matrix(&m, format)
    };
    io::stdout().write_all(text.as_bytes())?;
    Ok(Outcome::Complete)
}

pub fn detect(cfg: &RunConfig, file: Option<&Path>) -> Result<Outcome> {
    let mut text = String::new();
    match file {
        Some(p) if p != Path::new("-") => {
            text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        }
        _ => {
            io::stdin().read_to_string(&mut text)?;
        }
    }
    let pipeline = cfg.pipeline()?;
    let a = pipeline.analyze(&text)?;
    let doc = serde_json::json!({
        "extract_method": a.extracted.as_ref().map(|e| e.method),
        "fence_hint": a.fence_hint,
        "label": a.decision.label,
        "confidence": a.decision.confidence,
        "rule": a.decision.rule,
        "votes": a.decision.votes,
        "unavailable": a.unavailable.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
        "parse": a.parse,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(Outcome::from_problems(a.unavailable.len()))
}
