//! CSV output and per-cell summary statistics.
//!
//! Files written to the output directory:
//! - `results.csv`: one row per (replication, shift, method).
//! - `diagnostics.csv`: the same rows with per-relation CI verdicts.
//! - `summary.csv`: accuracy and `|cor(R, C | Y)|` quantiles per (shift, method).
//! - `warnings.csv`: replications that failed and were skipped.
//! - `predictions.csv`: per-example probabilities, only when requested.
//! - `config.txt`: the resolved configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataset::ShiftLevel;
use crate::diagnostics::CiReport;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{ExperimentResult, Method};

pub const RESULTS_HEADER: &str =
    "replication,shift,method,accuracy,corRY,corRC,corCY,corRY_givenC,corRC_givenY,corCY_givenR,verdict";

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn write_results<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER.split(',')).map_err(csv_error)?;
    for row in &result.rows {
        let r = &row.report;
        w.write_record([
            row.replication.to_string(),
            row.shift.to_string(),
            row.method.to_string(),
            format!("{:.4}", row.accuracy),
            format!("{:?}", r.cor_ry),
            format!("{:?}", r.cor_rc),
            format!("{:?}", r.cor_cy),
            format!("{:?}", r.cor_ry_given_c),
            format!("{:?}", r.cor_rc_given_y),
            format!("{:?}", r.cor_cy_given_r),
            r.overall.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["replication".to_string(), "shift".into(), "method".into()];
    header.extend(CiReport::csv_header().split(',').map(String::from));
    w.write_record(&header).map_err(csv_error)?;
    for row in &result.rows {
        let mut record = vec![row.replication.to_string(), row.shift.to_string(), row.method.to_string()];
        record.extend(row.report.csv_fields().split(',').map(String::from));
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_warnings<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["replication", "message"]).map_err(csv_error)?;
    for warning in &result.warnings {
        w.write_record([warning.replication.to_string(), warning.message.clone()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["replication", "shift", "method", "index", "probability", "label", "color"])
        .map_err(csv_error)?;
    for p in &result.predictions {
        for (i, prob) in p.probabilities.iter().enumerate() {
            w.write_record([
                p.replication.to_string(),
                p.shift.to_string(),
                p.method.to_string(),
                i.to_string(),
                format!("{prob:?}"),
                p.labels[i].to_string(),
                p.colors[i].to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean, median and quartiles; quantiles interpolate linearly between
/// order statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quantiles {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub shift: ShiftLevel,
    pub method: Method,
    pub replications: usize,
    pub accuracy: Quantiles,
    /// Of `|cor(R, C | Y)|`.
    pub partial_rc: Quantiles,
}

pub fn summarize(result: &ExperimentResult) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for shift in ShiftLevel::ALL {
        for method in Method::ALL {
            let acc: Vec<f64> = result.rows_for(shift, method).map(|r| r.accuracy).collect();
            let pc: Vec<f64> = result.rows_for(shift, method).map(|r| r.report.cor_rc_given_y.abs()).collect();
            if let (Some(accuracy), Some(partial_rc)) = (Quantiles::of(&acc), Quantiles::of(&pc)) {
                out.push(SummaryRow {
                    shift,
                    method,
                    replications: acc.len(),
                    accuracy,
                    partial_rc,
                });
            }
        }
    }
    out
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "shift",
        "method",
        "replications",
        "accuracy_mean",
        "accuracy_q1",
        "accuracy_median",
        "accuracy_q3",
        "abs_corRC_givenY_mean",
        "abs_corRC_givenY_q1",
        "abs_corRC_givenY_median",
        "abs_corRC_givenY_q3",
    ])
    .map_err(csv_error)?;
    for row in summary {
        let mut record = vec![row.shift.to_string(), row.method.to_string(), row.replications.to_string()];
        for q in [row.accuracy, row.partial_rc] {
            record.extend([q.mean, q.q1, q.median, q.q3].iter().map(|v| format!("{v:?}")));
        }
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes all output files into `config.output_dir`, creating it if needed.
pub fn write_outputs(config: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), config.to_text())?;
    write_results(result, create(dir, "results.csv")?)?;
    write_diagnostics(result, create(dir, "diagnostics.csv")?)?;
    write_summary(&summarize(result), create(dir, "summary.csv")?)?;
    write_warnings(result, create(dir, "warnings.csv")?)?;
    if config.write_predictions {
        write_predictions(result, create(dir, "predictions.csv")?)?;
    }
    Ok(())
}
