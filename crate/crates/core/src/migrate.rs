//! Migration matrices (which language was asked for, which one came back)
//! and the chord-diagram flow documents derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;
use crate::metrics::{GroupBy, GroupKey, SampleEvaluation};

pub const CHORD_SCHEMA_VERSION: u32 = 1;

/// What the matrix rows are keyed by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixAxis {
    /// Expected (target) language, over every sample. The diagonal holds the
    /// non-confused samples.
    #[default]
    Target,
    /// Source language of translation tasks, over confused samples only.
    /// Every cell is a migration, including source == detected, which means
    /// the model answered in the language it was translating from.
    Source,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationMatrix {
    pub axis: MatrixAxis,
    /// row language → detected language → count
    pub counts: BTreeMap<LanguageId, BTreeMap<LanguageId, u64>>,
    pub n_total: u64,
    pub n_confused: u64,
}

impl MigrationMatrix {
    pub fn new(axis: MatrixAxis) -> Self {
        MigrationMatrix {
            axis,
            ..Default::default()
        }
    }

    /// Adds one sample; returns false when the sample does not belong on this
    /// axis (non-translation or non-confused samples on the source axis).
    pub fn add(&mut self, s: &SampleEvaluation) -> bool {
        let row = match self.axis {
            MatrixAxis::Target => &s.expected,
            MatrixAxis::Source => match &s.source_language {
                Some(src) if s.confused => src,
                _ => return false,
            },
        };
        *self
            .counts
            .entry(row.clone())
            .or_default()
            .entry(s.detected.clone())
            .or_insert(0) += 1;
        self.n_total += 1;
        self.n_confused += s.confused as u64;
        true
    }

    /// Sums another matrix of the same axis into this one.
    pub fn merge(&mut self, other: &MigrationMatrix) {
        assert_eq!(self.axis, other.axis, "cannot merge matrices with different axes");
        for (row, cols) in &other.counts {
            let dst = self.counts.entry(row.clone()).or_default();
            for (col, n) in cols {
                *dst.entry(col.clone()).or_insert(0) += n;
            }
        }
        self.n_total += other.n_total;
        self.n_confused += other.n_confused;
    }

    pub fn get(&self, row: &LanguageId, col: &LanguageId) -> u64 {
        self.counts.get(row).and_then(|c| c.get(col)).copied().unwrap_or(0)
    }

    pub fn row_sums(&self) -> BTreeMap<LanguageId, u64> {
        self.counts
            .iter()
            .map(|(r, cols)| (r.clone(), cols.values().sum()))
            .collect()
    }

    pub fn diagonal_sum(&self) -> u64 {
        self.counts.iter().map(|(r, cols)| cols.get(r).copied().unwrap_or(0)).sum()
    }

    /// Whether a cell counts as a migration.
    fn is_flow(&self, row: &LanguageId, col: &LanguageId) -> bool {
        self.axis == MatrixAxis::Source || row != col
    }

    /// Destination with the largest migration mass and its share of all
    /// migrations; ties go to the lexicographically smallest name.
    pub fn dominant_destination(&self) -> Option<(LanguageId, f64)> {
        let mut columns: BTreeMap<&LanguageId, u64> = BTreeMap::new();
        for (row, cols) in &self.counts {
            for (col, &n) in cols {
                if n > 0 && self.is_flow(row, col) {
                    *columns.entry(col).or_insert(0) += n;
                }
            }
        }
        let total: u64 = columns.values().sum();
        let mut best: Option<(&LanguageId, u64)> = None;
        for (col, n) in columns {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((col, n));
            }
        }
        best.map(|(l, n)| (l.clone(), n as f64 / total as f64))
    }
}

pub fn build_matrix(samples: &[SampleEvaluation]) -> MigrationMatrix {
    build_matrix_on(samples, MatrixAxis::Target)
}

pub fn build_matrix_on(samples: &[SampleEvaluation], axis: MatrixAxis) -> MigrationMatrix {
    let mut m = MigrationMatrix::new(axis);
    for s in samples {
        m.add(s);
    }
    m
}

/// One matrix per group, keyed like the metric summaries.
pub fn build_grouped(
    samples: &[SampleEvaluation],
    group_by: GroupBy,
    axis: MatrixAxis,
) -> BTreeMap<GroupKey, MigrationMatrix> {
    let mut out: BTreeMap<GroupKey, MigrationMatrix> = BTreeMap::new();
    for s in samples {
        let key = group_by.key(s);
        let m = out.entry(key.clone()).or_insert_with(|| MigrationMatrix::new(axis));
        m.add(s);
    }
    // translation-free groups leave empty source matrices behind
    out.retain(|_, m| m.n_total > 0);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub source: LanguageId,
    pub target: LanguageId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordDocument {
    pub schema_version: u32,
    pub group: GroupKey,
    pub axis: MatrixAxis,
    pub flows: Vec<Flow>,
    pub n_total: u64,
    pub n_confused: u64,
}

/// Flows sorted by descending count, then by (source, target). On the target
/// axis the diagonal is left out unless `include_diagonal` is set; on the
/// source axis every cell is a migration and always included.
pub fn emit_chord(matrix: &MigrationMatrix, group: GroupKey, include_diagonal: bool) -> ChordDocument {
    let mut flows: Vec<Flow> = matrix
        .counts
        .iter()
        .flat_map(|(row, cols)| cols.iter().map(move |(col, &n)| (row, col, n)))
        .filter(|&(row, col, n)| n > 0 && (include_diagonal || matrix.is_flow(row, col)))
        .map(|(row, col, n)| Flow {
            source: row.clone(),
            target: col.clone(),
            count: n,
        })
        .collect();
    flows.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.source.cmp(&b.source))
            .then_with(|| a.target.cmp(&b.target))
    });
    ChordDocument {
        schema_version: CHORD_SCHEMA_VERSION,
        group,
        axis: matrix.axis,
        flows,
        n_total: matrix.n_total,
        n_confused: matrix.n_confused,
    }
}
