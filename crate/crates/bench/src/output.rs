//! Per-repetition CSV, JSON summary and an SVG strip plot of p̂/p.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::experiment::{ExperimentReport, FailedRep, MethodKind, RepRow};
use crate::metrics::Summary;

pub const CSV_HEADER: [&str; 6] = ["rep", "seed", "p_hat", "lsf_calls", "levels", "converged"];

/// Contents of `summary.json`; see `schemas/summary.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub problem: String,
    pub method: MethodKind,
    pub p_ref: f64,
    pub base_seed: u64,
    pub reps: usize,
    pub failed: Vec<FailedRep>,
    pub summary: Summary,
}

impl From<&ExperimentReport> for SummaryDoc {
    fn from(r: &ExperimentReport) -> Self {
        Self {
            problem: r.problem.clone(),
            method: r.method,
            p_ref: r.p_ref,
            base_seed: r.base_seed,
            reps: r.reps,
            failed: r.failed.clone(),
            summary: r.summary.clone(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_owned(),
        source,
    }
}

fn fmt_err(path: &Path, e: impl ToString) -> BenchError {
    BenchError::Format {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

pub fn write_csv(rows: &[RepRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| fmt_err(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| fmt_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| fmt_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<RepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| fmt_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| fmt_err(path, e)))
        .collect()
}

pub fn write_summary(report: &ExperimentReport, path: &Path) -> Result<()> {
    let doc = SummaryDoc::from(report);
    let text = serde_json::to_string_pretty(&doc).expect("summary serializes");
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<SummaryDoc> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| fmt_err(path, e))
}

/// Relative errors p̂/p per repetition on a log axis, with the reference at 1.
pub fn write_svg(report: &ExperimentReport, path: &Path) -> Result<()> {
    let errs = &report.summary.rel_errors;
    let positive: Vec<f64> = errs.iter().copied().filter(|&e| e > 0.0).collect();
    let lo = positive.iter().copied().fold(1.0, f64::min) / 2.0;
    let hi = positive.iter().copied().fold(1.0, f64::max) * 2.0;
    let n = errs.len().max(1);
    let root = SVGBackend::new(path, (640, 400)).into_drawing_area();
    let draw = |e: Box<dyn std::error::Error>| fmt_err(path, e);
    root.fill(&WHITE).map_err(|e| draw(Box::new(e)))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(
            format!("{} / {}: p̂ / p", report.problem, report.method.name()),
            ("sans-serif", 18),
        )
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(-0.5..(n as f64 - 0.5), (lo..hi).log_scale())
        .map_err(|e| draw(Box::new(e)))?;
    chart
        .configure_mesh()
        .x_desc("repetition")
        .y_desc("p̂ / p")
        .draw()
        .map_err(|e| draw(Box::new(e)))?;
    chart
        .draw_series(LineSeries::new(
            [(-0.5, 1.0), (n as f64 - 0.5, 1.0)],
            BLACK.stroke_width(1),
        ))
        .map_err(|e| draw(Box::new(e)))?;
    chart
        .draw_series(
            positive
                .iter()
                .enumerate()
                .map(|(i, &e)| Circle::new((i as f64, e), 3, BLUE.filled())),
        )
        .map_err(|e| draw(Box::new(e)))?;
    root.present().map_err(|e| draw(Box::new(e)))?;
    Ok(())
}

/// Write `runs.csv`, `summary.json` and optionally `relative_errors.svg`
/// into `dir`, creating it if needed.
pub fn emit_outputs(report: &ExperimentReport, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join("runs.csv");
    let json = dir.join("summary.json");
    write_csv(&report.rows, &csv)?;
    write_summary(report, &json)?;
    let mut out = vec![csv, json];
    if svg {
        let p = dir.join("relative_errors.svg");
        write_svg(report, &p)?;
        out.push(p);
    }
    Ok(out)
}
