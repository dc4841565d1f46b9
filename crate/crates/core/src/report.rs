//! Table rendering for metric summaries and migration matrices: pipe-table
//! markdown, RFC 4180 CSV, and JSON with the raw counts alongside rates.
//!
//! Percentages are computed from the integer counts and rounded half-to-even
//! in integer arithmetic, so output does not depend on float formatting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{LanguageId, NaturalLanguageTag};
use crate::metrics::{
    GroupBy, GroupCounts, MetricsSummary, Ratio, ALL_BUCKET, ENGLISH_BUCKET, NON_ENGLISH_BUCKET,
};
use crate::migrate::MigrationMatrix;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const UNDEFINED_CELL: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("unknown report column `{0}`")]
    UnknownColumn(String),
    #[error("summary for {model_id} / {dataset} has no natural-language bucket")]
    MissingBucket { model_id: String, dataset: String },
    #[error("a report needs at least one column")]
    NoColumns,
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    Model,
    Dataset,
    Nl,
    NTotal,
    NConfused,
    Lcpr,
    CpprNonconfused,
    CpprConfused,
    Dmr,
    FprNonconfused,
    FprConfused,
}

const COLUMNS: &[(Column, &str, &str)] = &[
    (Column::Model, "model", "LLMs"),
    (Column::Dataset, "dataset", "Dataset"),
    (Column::Nl, "nl", "NL"),
    (Column::NTotal, "n_total", "N"),
    (Column::NConfused, "n_confused", "Confused"),
    (Column::Lcpr, "lcpr", "LCPR"),
    (Column::CpprNonconfused, "cppr_nonconfused", "CPPR non confuse %"),
    (Column::CpprConfused, "cppr_confused", "CPPR confuse %"),
    (Column::Dmr, "dmr", "DMR %"),
    (Column::FprNonconfused, "fpr_nonconfused", "FPR non confuse %"),
    (Column::FprConfused, "fpr_confused", "FPR confuse %"),
];

/// Column ids of the standard confusion table.
pub const CONFUSION_TABLE_COLUMNS: &[&str] = &["model", "dataset", "lcpr", "cppr_nonconfused", "cppr_confused", "dmr"];

impl Column {
    pub fn parse(id: &str) -> Result<Column, ReportError> {
        COLUMNS
            .iter()
            .find(|(_, cid, _)| *cid == id.trim())
            .map(|(c, _, _)| *c)
            .ok_or_else(|| ReportError::UnknownColumn(id.to_string()))
    }

    pub fn id(self) -> &'static str {
        COLUMNS.iter().find(|(c, _, _)| *c == self).unwrap().1
    }

    pub fn header(self) -> &'static str {
        COLUMNS.iter().find(|(c, _, _)| *c == self).unwrap().2
    }

    fn ratio(self, counts: &GroupCounts) -> Option<Ratio> {
        match self {
            Column::Lcpr => counts.lcpr(),
            Column::CpprNonconfused => counts.cppr_nonconfused(),
            Column::CpprConfused => counts.cppr_confused(),
            Column::FprNonconfused => counts.fpr_nonconfused(),
            Column::FprConfused => counts.fpr_confused(),
            _ => None,
        }
    }

    fn is_rate(self) -> bool {
        matches!(
            self,
            Column::Lcpr | Column::CpprNonconfused | Column::CpprConfused | Column::FprNonconfused | Column::FprConfused
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub format: ReportFormat,
    pub columns: Vec<String>,
    pub grouping: GroupBy,
    pub percent_precision: u32,
}

impl Default for ReportSpec {
    fn default() -> Self {
        ReportSpec {
            format: ReportFormat::Markdown,
            columns: CONFUSION_TABLE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            grouping: GroupBy::ModelDataset,
            percent_precision: 2,
        }
    }
}

impl ReportSpec {
    pub fn parsed_columns(&self) -> Result<Vec<Column>, ReportError> {
        if self.columns.is_empty() {
            return Err(ReportError::NoColumns);
        }
        self.columns.iter().map(|c| Column::parse(c)).collect()
    }
}

/// `num/den` as a percentage with `precision` decimals, rounded half to even.
pub fn format_percent(num: u64, den: u64, precision: u32) -> String {
    assert!(den > 0, "percentage of an empty denominator");
    let scale = 10u128.pow(precision);
    let scaled = num as u128 * 100 * scale;
    let den = den as u128;
    let mut q = scaled / den;
    let r = scaled % den;
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    let int = q / scale;
    if precision == 0 {
        return int.to_string();
    }
    let frac = q % scale;
    format!("{int}.{frac:0width$}", width = precision as usize)
}

fn percent_cell(r: Option<Ratio>, precision: u32) -> String {
    r.map_or_else(|| UNDEFINED_CELL.to_string(), |r| format_percent(r.num, r.den, precision))
}

fn cell(column: Column, s: &MetricsSummary, precision: u32) -> String {
    match column {
        Column::Model => s.group.model_id.clone(),
        Column::Dataset => s.group.dataset.clone(),
        Column::Nl => s.group.nl_bucket.clone().unwrap_or_else(|| UNDEFINED_CELL.to_string()),
        Column::NTotal => s.n_total.to_string(),
        Column::NConfused => s.n_confused.to_string(),
        Column::Dmr => match &s.dmr_dominant {
            Some(d) => format!(
                "{} ({})",
                format_percent(d.count, s.dmr_denominator(), precision),
                d.language
            ),
            None => UNDEFINED_CELL.to_string(),
        },
        rate => percent_cell(rate.ratio(&s.counts), precision),
    }
}

fn markdown_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let escape = |c: &str| c.replace('|', "\\|");
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", headers.iter().map(|h| escape(h)).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(out, "|{}", " --- |".repeat(headers.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(" | "));
    }
    out
}

fn csv_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(headers).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

fn ratio_json(r: Option<Ratio>) -> Value {
    match r {
        Some(r) => json!({"num": r.num, "den": r.den, "rate": r.value()}),
        None => Value::Null,
    }
}

fn sorted(summaries: &[MetricsSummary]) -> Vec<&MetricsSummary> {
    let mut v: Vec<_> = summaries.iter().collect();
    v.sort_by(|a, b| a.group.cmp(&b.group));
    v
}

/// Renders one row per summary, sorted by group key.
pub fn render(summaries: &[MetricsSummary], spec: &ReportSpec) -> Result<String, ReportError> {
    let columns = spec.parsed_columns()?;
    let rows: Vec<Vec<String>> = sorted(summaries)
        .into_iter()
        .map(|s| columns.iter().map(|c| cell(*c, s, spec.percent_precision)).collect())
        .collect();
    let headers: Vec<String> = columns.iter().map(|c| c.header().to_string()).collect();
    Ok(match spec.format {
        ReportFormat::Markdown => markdown_table(&headers, &rows),
        ReportFormat::Csv => csv_table(&headers, &rows),
        ReportFormat::Json => {
            let json_rows: Vec<Value> = sorted(summaries)
                .into_iter()
                .zip(&rows)
                .map(|(s, cells)| {
                    let cells: serde_json::Map<String, Value> = columns
                        .iter()
                        .zip(cells)
                        .map(|(c, v)| (c.id().to_string(), Value::String(v.clone())))
                        .collect();
                    json!({
                        "group": s.group,
                        "cells": cells,
                        "counts": s.counts,
                        "lcpr": ratio_json(s.counts.lcpr()),
                        "cppr_nonconfused": ratio_json(s.counts.cppr_nonconfused()),
                        "cppr_confused": ratio_json(s.counts.cppr_confused()),
                        "fpr_nonconfused": ratio_json(s.counts.fpr_nonconfused()),
                        "fpr_confused": ratio_json(s.counts.fpr_confused()),
                        "dmr_dominant": s.dmr_dominant.as_ref().map(|d| json!({
                            "language": d.language,
                            "num": d.count,
                            "den": s.dmr_denominator(),
                            "rate": d.rate,
                        })),
                        "unknown_policy": s.unknown_policy,
                    })
                })
                .collect();
            let doc = json!({
                "schema_version": REPORT_SCHEMA_VERSION,
                "percent_precision": spec.percent_precision,
                "columns": columns.iter().map(|c| c.id()).collect::<Vec<_>>(),
                "headers": headers,
                "rows": json_rows,
            });
            to_json_text(&doc)
        }
    })
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn english_bucket(bucket: &str) -> bool {
    match bucket {
        ENGLISH_BUCKET => true,
        NON_ENGLISH_BUCKET => false,
        tag => NaturalLanguageTag::new(tag).is_some_and(|t| t.is_english()),
    }
}

/// English / Non-English / All rows with one column per model (per model
/// and dataset when more than one dataset is present). The metric is the
/// first rate column of `spec.columns`, LCPR when there is none. `All` combines
/// the counts of both buckets, so it is their size-weighted mean.
pub fn render_nl_breakdown(summaries: &[MetricsSummary], spec: &ReportSpec) -> Result<String, ReportError> {
    let metric = spec
        .parsed_columns()?
        .into_iter()
        .find(|c| c.is_rate())
        .unwrap_or(Column::Lcpr);
    let mut buckets: BTreeMap<(String, String), [GroupCounts; 2]> = BTreeMap::new();
    for s in summaries {
        let bucket = s.group.nl_bucket.as_deref().ok_or_else(|| ReportError::MissingBucket {
            model_id: s.group.model_id.clone(),
            dataset: s.group.dataset.clone(),
        })?;
        let slot = if english_bucket(bucket) { 0 } else { 1 };
        buckets
            .entry((s.group.model_id.clone(), s.group.dataset.clone()))
            .or_default()[slot]
            .merge(&s.counts);
    }
    let datasets: BTreeSet<&String> = buckets.keys().map(|(_, d)| d).collect();
    let with_dataset = datasets.len() > 1;
    let mut headers = vec![format!("NL ({})", metric.header())];
    for (model, dataset) in buckets.keys() {
        headers.push(if with_dataset {
            format!("{model} ({dataset})")
        } else {
            model.clone()
        });
    }
    let p = spec.percent_precision;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for (label, pick) in [(ENGLISH_BUCKET, Some(0)), (NON_ENGLISH_BUCKET, Some(1)), (ALL_BUCKET, None)] {
        let mut row = vec![label.to_string()];
        let mut json_cells = Vec::new();
        for ((model, dataset), pair) in &buckets {
            let counts = match pick {
                Some(i) => pair[i].clone(),
                None => {
                    let mut all = pair[0].clone();
                    all.merge(&pair[1]);
                    all
                }
            };
            let r = metric.ratio(&counts);
            row.push(percent_cell(r, p));
            json_cells.push(json!({
                "model_id": model,
                "dataset": dataset,
                "cell": percent_cell(r, p),
                "value": ratio_json(r),
                "n_total": counts.n_total,
            }));
        }
        rows.push(row);
        json_rows.push(json!({"bucket": label, "cells": json_cells}));
    }
    Ok(match spec.format {
        ReportFormat::Markdown => markdown_table(&headers, &rows),
        ReportFormat::Csv => csv_table(&headers, &rows),
        ReportFormat::Json => to_json_text(&json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "metric": metric.id(),
            "percent_precision": p,
            "rows": json_rows,
        })),
    })
}

/// Counts grid: one row per row language, one column per detected language.
pub fn render_matrix(matrix: &MigrationMatrix, format: ReportFormat) -> String {
    let cols: BTreeSet<&LanguageId> = matrix.counts.values().flat_map(|c| c.keys()).collect();
    let corner = match matrix.axis {
        crate::migrate::MatrixAxis::Target => "expected \\ detected",
        crate::migrate::MatrixAxis::Source => "source \\ detected",
    };
    let mut headers = vec![corner.to_string()];
    headers.extend(cols.iter().map(|c| c.to_string()));
    headers.push("total".to_string());
    let rows: Vec<Vec<String>> = matrix
        .counts
        .iter()
        .map(|(row, cells)| {
            let mut r = vec![row.to_string()];
            r.extend(cols.iter().map(|c| cells.get(*c).copied().unwrap_or(0).to_string()));
            r.push(cells.values().sum::<u64>().to_string());
            r
        })
        .collect();
    match format {
        ReportFormat::Markdown => markdown_table(&headers, &rows),
        ReportFormat::Csv => csv_table(&headers, &rows),
        ReportFormat::Json => to_json_text(&serde_json::to_value(matrix).expect("matrix serializes")),
    }
}

/// `<dataset>_<model>_<report>.<ext>`, with `all` standing in for a dataset
/// or model when the report spans several. Characters outside
/// `[A-Za-z0-9._-]` become `_`.
pub fn report_file_name(datasets: &[&str], models: &[&str], report: &str, format: ReportFormat) -> String {
    fn one(values: &[&str]) -> String {
        let distinct: BTreeSet<&&str> = values.iter().collect();
        match distinct.len() {
            1 => sanitize(values[0]),
            _ => "all".to_string(),
        }
    }
    format!(
        "{}_{}_{}.{}",
        one(datasets),
        one(models),
        sanitize(report),
        format.extension()
    )
}

fn sanitize(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    if out.is_empty() {
        "_".to_string()
    } else {
        out
    }
}
