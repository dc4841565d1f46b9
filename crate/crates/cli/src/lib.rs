//! `plc`: generate completions, evaluate them for language confusion, and
//! render the resulting tables and migration data.
//!
//! Exit codes: 0 when everything succeeded, 2 when the run finished but some
//! inputs or samples were skipped, 1 on a fatal error.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

use plc_core::migrate::MatrixAxis;
use plc_core::report::ReportFormat;

use crate::commands::{Outcome, ReportOptions};
use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "plc", version, about = "Programming-language confusion evaluation harness")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Language registry JSON, overriding the config.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, overriding the config.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Reserved; every stage is deterministic and nothing is sampled.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format for tables: markdown, csv or json.
    #[arg(long, global = true)]
    pub format: Option<ReportFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    Target,
    Source,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Query the configured endpoints for every task.
    Generate {
        #[arg(long)]
        tasks: PathBuf,
        /// Restrict to these model ids (repeatable).
        #[arg(long = "model")]
        models: Vec<String>,
        /// Completions file; defaults to `<out>/completions.jsonl`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Detect, parse and classify every completion.
    Evaluate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        completions: PathBuf,
        /// JSONL of {task_id, model_id, passed} unit-test outcomes.
        #[arg(long)]
        functional: Option<PathBuf>,
        /// Evaluations file; defaults to `<out>/evaluations.jsonl`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write summary tables, the natural-language breakdown and matrices.
    Report {
        #[arg(long)]
        evaluations: PathBuf,
        /// Also write chord-diagram flow documents.
        #[arg(long)]
        chord: bool,
        /// Decimals for percentages.
        #[arg(long)]
        precision: Option<u32>,
        /// Comma-separated column ids.
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
    },
    /// Print one migration matrix (or its chord document) to stdout.
    Matrix {
        #[arg(long)]
        evaluations: PathBuf,
        #[arg(long, value_enum, default_value = "target")]
        axis: Axis,
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long = "dataset")]
        datasets: Vec<String>,
        #[arg(long)]
        chord: bool,
        /// Keep non-confused samples in the chord flows.
        #[arg(long)]
        include_diagonal: bool,
    },
    /// Show how a single response or snippet is classified.
    Detect {
        /// File to read; stdin when absent or `-`.
        file: Option<PathBuf>,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(r) = &cli.registry {
        cfg.registry = Some(r.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        cfg.jobs = j;
    }
    if let Some(f) = cli.format {
        cfg.report.format = f;
    }
    if cli.seed.is_some() {
        log::info!("--seed is reserved and has no effect");
    }
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    let cfg = effective_config(&cli)?;
    match cli.command {
        Command::Generate { tasks, models, output } => commands::generate(&cfg, &tasks, &models, output),
        Command::Evaluate {
            tasks,
            completions,
            functional,
            output,
        } => commands::evaluate(&cfg, &tasks, &completions, functional.as_deref(), output),
        Command::Report {
            evaluations,
            chord,
            precision,
            columns,
        } => {
            let opts = ReportOptions {
                format: cfg.report.format,
                precision: precision.unwrap_or(cfg.report.percent_precision),
                columns: columns.unwrap_or_else(|| cfg.report.columns.clone()),
                chord,
            };
            commands::report(&cfg, &evaluations, &opts)
        }
        Command::Matrix {
            evaluations,
            axis,
            models,
            datasets,
            chord,
            include_diagonal,
        } => {
            let axis = match axis {
                Axis::Target => MatrixAxis::Target,
                Axis::Source => MatrixAxis::Source,
            };
            commands::matrix(&evaluations, axis, &models, &datasets, chord, include_diagonal, cfg.report.format)
        }
        Command::Detect { file } => commands::detect(&cfg, file.as_deref()),
    }
}

/// Parses `args`, runs the command and maps the result to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(Outcome::Complete) => EXIT_OK,
        Ok(Outcome::Partial) => EXIT_PARTIAL,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}
