//! Result records, aggregates and CSV/JSON emission.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::analysis::{AnalysisReport, ComplexMatrixJson};
use crate::error::Result;
use crate::mimo_capacity::AllocationMode;

pub const CSV_HEADER: &str = "trial,snr_db,gain_or_capacity,method,mode,m_size,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub snr_db: Option<f64>,
    pub gain_or_capacity: f64,
    pub method: String,
    pub mode: Option<AllocationMode>,
    pub m_size: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub snr_db: Option<f64>,
    pub method: String,
    pub mode: Option<AllocationMode>,
    pub m_size: Option<usize>,
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub library_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub report: AnalysisReport,
    /// Monte Carlo estimate of `E[h_i h_j*]` for correlation runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_correlation: Option<ComplexMatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisOutput>,
}

fn same_group(a: &Aggregate, r: &TrialRecord) -> bool {
    a.snr_db.map(f64::to_bits) == r.snr_db.map(f64::to_bits)
        && a.method == r.method
        && a.mode == r.mode
        && a.m_size == r.m_size
}

/// Mean and standard error per (snr_db, method, mode, m_size) group, in
/// order of first appearance. Sums run in record order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut groups: Vec<(Aggregate, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(a, _)| same_group(a, r)) {
            Some((_, values)) => values.push(r.gain_or_capacity),
            None => groups.push((
                Aggregate {
                    snr_db: r.snr_db,
                    method: r.method.clone(),
                    mode: r.mode,
                    m_size: r.m_size,
                    mean: 0.0,
                    std_error: 0.0,
                    count: 0,
                },
                vec![r.gain_or_capacity],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut a, values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std_error = if n > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            a.mean = mean;
            a.std_error = std_error;
            a.count = n;
            a
        })
        .collect()
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |x| x.to_string())
}

/// Per-trial rows under [`CSV_HEADER`]. Analysis-only runs list the
/// singular spectrum instead.
pub fn render_csv(results: &ResultSet) -> String {
    let mut out = String::new();
    if results.records.is_empty() {
        if let Some(a) = &results.analysis {
            out.push_str("index,singular_value,cumulative\n");
            for (i, (s, f)) in a.report.singular_values.iter().zip(&a.report.cumulative).enumerate() {
                let _ = writeln!(out, "{},{s},{f}", i + 1);
            }
            return out;
        }
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &results.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial,
            opt(&r.snr_db),
            r.gain_or_capacity,
            r.method,
            opt(&r.mode),
            opt(&r.m_size),
            r.seed
        );
    }
    out
}

pub fn render_json(results: &ResultSet) -> String {
    let mut s = serde_json::to_string_pretty(results).expect("result set serialises");
    s.push('\n');
    s
}

pub fn render(results: &ResultSet, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => render_csv(results),
        OutputFormat::Json => render_json(results),
    }
}

/// Writes the rendered results to `path`.
pub fn emit_results(results: &ResultSet, format: OutputFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render(results, format))?;
    Ok(())
}

/// Aggregate table for terminal display.
pub fn summary_table(results: &ResultSet) -> String {
    let mut out = String::from("snr_db,method,mode,m_size,mean,std_error,count\n");
    for a in &results.aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            opt(&a.snr_db),
            a.method,
            opt(&a.mode),
            opt(&a.m_size),
            a.mean,
            a.std_error,
            a.count
        );
    }
    out
}
