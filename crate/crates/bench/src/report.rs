//! Report types and their CSV/JSON encodings.
//!
//! CSV columns are fixed and floats are printed with four decimals; JSON
//! carries full precision and the run metadata.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ReportFormat;
use crate::error::Result;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of the retrieval report CSV.
pub const CELL_COLUMNS: [&str; 8] = [
    "corruption",
    "similarity",
    "queries",
    "errors",
    "error_rate",
    "embed_seconds",
    "score_seconds",
    "total_seconds",
];

/// Column order of the mean-sweep CSV.
pub const SWEEP_COLUMNS: [&str; 5] = ["model", "similarity", "mean", "variance", "error_rate"];

/// Column order of the timing CSV.
pub const TIMING_COLUMNS: [&str; 8] = [
    "space",
    "similarity",
    "dim",
    "count",
    "queries",
    "encode_seconds",
    "score_seconds",
    "retrieve_seconds",
];

/// One (corruption × similarity) entry of a retrieval experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub corruption: String,
    pub similarity: String,
    pub queries: usize,
    pub errors: usize,
    /// Fraction of queries whose top index differs from the true index.
    pub error_rate: f64,
    /// Time spent mapping corrupted queries into the scoring space.
    pub embed_seconds: f64,
    /// Time spent on scoring, separation, and projection.
    pub score_seconds: f64,
}

impl Cell {
    pub fn total_seconds(&self) -> f64 {
        self.embed_seconds + self.score_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub mode: String,
    pub dataset: String,
    pub feature_map: String,
    pub separation: String,
    /// Data dimension `d`.
    pub dim: usize,
    /// Number of stored items `N`.
    pub count: usize,
    /// Scoring-space dimension `e` (equal to `d` in pixel space).
    pub embedding_dim: usize,
    pub seed: u64,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: Metadata,
    pub cells: Vec<Cell>,
}

impl ExperimentReport {
    /// Copy with every timing field zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.cells {
            c.embed_seconds = 0.0;
            c.score_seconds = 0.0;
        }
        out
    }

    pub fn cell(&self, corruption: &str, similarity: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.corruption == corruption && c.similarity == similarity)
    }
}

/// One point of a mean sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub model: String,
    pub similarity: String,
    pub mean: f64,
    pub variance: f64,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metadata: Metadata,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Error rates of one (model, similarity) series, ordered by mean.
    pub fn series(&self, model: &str, similarity: &str) -> Vec<(f64, f64)> {
        let mut s: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.model == model && p.similarity == similarity)
            .map(|p| (p.mean, p.error_rate))
            .collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    }
}

/// Median timings for one scoring space and similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    /// `pixel` or `embedding`.
    pub space: String,
    pub similarity: String,
    /// Dimension scores are computed in.
    pub dim: usize,
    pub count: usize,
    pub queries: usize,
    /// Feature-map forward passes for all queries.
    pub encode_seconds: f64,
    /// Score vectors for all encoded queries.
    pub score_seconds: f64,
    /// Full retrieval (score, separation, projection) for all encoded queries.
    pub retrieve_seconds: f64,
}

impl TimingRow {
    /// Scoring cost including the forward pass.
    pub fn encode_and_score(&self) -> f64 {
        self.encode_seconds + self.score_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub reps: usize,
    pub rows: Vec<TimingRow>,
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: Vec<[String; N]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn report_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let rows = report
        .cells
        .iter()
        .map(|c| {
            [
                c.corruption.clone(),
                c.similarity.clone(),
                c.queries.to_string(),
                c.errors.to_string(),
                f4(c.error_rate),
                f4(c.embed_seconds),
                f4(c.score_seconds),
                f4(c.total_seconds()),
            ]
        })
        .collect();
    csv_bytes(CELL_COLUMNS, rows)
}

pub fn sweep_csv(report: &SweepReport) -> Result<Vec<u8>> {
    let rows = report
        .points
        .iter()
        .map(|p| {
            [
                p.model.clone(),
                p.similarity.clone(),
                f4(p.mean),
                f4(p.variance),
                f4(p.error_rate),
            ]
        })
        .collect();
    csv_bytes(SWEEP_COLUMNS, rows)
}

pub fn timing_csv(report: &TimingReport) -> Result<Vec<u8>> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            [
                r.space.clone(),
                r.similarity.clone(),
                r.dim.to_string(),
                r.count.to_string(),
                r.queries.to_string(),
                f4(r.encode_seconds),
                f4(r.score_seconds),
                f4(r.retrieve_seconds),
            ]
        })
        .collect();
    csv_bytes(TIMING_COLUMNS, rows)
}

/// Anything the CLI can write as a report.
pub trait Report: Serialize {
    fn to_csv(&self) -> Result<Vec<u8>>;

    fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    fn encode(&self, format: ReportFormat) -> Result<Vec<u8>> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

impl Report for ExperimentReport {
    fn to_csv(&self) -> Result<Vec<u8>> {
        report_csv(self)
    }
}

impl Report for SweepReport {
    fn to_csv(&self) -> Result<Vec<u8>> {
        sweep_csv(self)
    }
}

impl Report for TimingReport {
    fn to_csv(&self) -> Result<Vec<u8>> {
        timing_csv(self)
    }
}

/// Writes `report` to `path`, or to stdout when `path` is `None`.
pub fn write_report<R: Report>(report: &R, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let bytes = report.encode(format)?;
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

pub fn read_json_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metadata() -> Metadata {
        Metadata {
            mode: "uhn".into(),
            dataset: "synthetic:10:0".into(),
            feature_map: "identity".into(),
            separation: "max".into(),
            dim: 784,
            count: 10,
            embedding_dim: 784,
            seed: 1,
            engine_version: ENGINE_VERSION.into(),
        }
    }

    fn cell() -> Cell {
        Cell {
            corruption: "gaussian:mean=0,variance=0.2,clamp=true".into(),
            similarity: "cosine".into(),
            queries: 3,
            errors: 1,
            error_rate: 1.0 / 3.0,
            embed_seconds: 0.000123456,
            score_seconds: 1.5,
        }
    }

    #[test]
    fn empty_grid_is_header_only() {
        let r = ExperimentReport {
            metadata: metadata(),
            cells: vec![],
        };
        let csv = String::from_utf8(report_csv(&r).unwrap()).unwrap();
        assert_eq!(
            csv,
            "corruption,similarity,queries,errors,error_rate,embed_seconds,score_seconds,total_seconds\n"
        );
    }

    #[test]
    fn csv_rounds_to_four_decimals_and_quotes_commas() {
        let r = ExperimentReport {
            metadata: metadata(),
            cells: vec![cell()],
        };
        let csv = String::from_utf8(report_csv(&r).unwrap()).unwrap();
        let row = csv.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "\"gaussian:mean=0,variance=0.2,clamp=true\",cosine,3,1,0.3333,0.0001,1.5000,1.5001"
        );
    }

    #[test]
    fn json_round_trips_losslessly() {
        let r = ExperimentReport {
            metadata: metadata(),
            cells: vec![cell()],
        };
        let back: ExperimentReport = serde_json::from_slice(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.cells[0].error_rate.to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn sweep_series_is_sorted_by_mean() {
        let p = |mean: f64, e: f64| SweepPoint {
            model: "uhn".into(),
            similarity: "cosine".into(),
            mean,
            variance: 0.1,
            error_rate: e,
        };
        let r = SweepReport {
            metadata: metadata(),
            points: vec![p(0.2, 0.5), p(0.0, 0.1), p(0.1, 0.3)],
        };
        assert_eq!(
            r.series("uhn", "cosine"),
            vec![(0.0, 0.1), (0.1, 0.3), (0.2, 0.5)]
        );
        assert!(r.series("semantic", "cosine").is_empty());
    }
}
