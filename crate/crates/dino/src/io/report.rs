use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dino_core::metrics::{EvalConfig, EvalReport, Metric};
use serde::{Deserialize, Serialize};

use super::{create_dir, write_manifest};
use crate::error::{io, Result};

pub const FORMAT: &str = "dino-report";
pub const VERSION: u32 = 1;
pub const CSV: &str = "per_sample.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub accuracy: f64,
    pub excluded: usize,
}

/// JSON side of an evaluation; per-sample errors go to the CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format: String,
    pub version: u32,
    pub run: String,
    pub data: String,
    pub n_samples: usize,
    pub config: EvalConfig,
    pub noise_std: Option<f64>,
    pub metrics: Vec<MetricSummary>,
    pub warnings: Vec<String>,
}

/// Writes `manifest.json` and `per_sample.csv` into `dir`.
pub fn save_report(dir: &Path, run: &str, data: &str, report: &EvalReport) -> Result<ReportDocument> {
    create_dir(dir)?;
    let n = report.results.first().map_or(0, |r| r.per_sample.len());
    let doc = ReportDocument {
        format: FORMAT.into(),
        version: VERSION,
        run: run.into(),
        data: data.into(),
        n_samples: n,
        config: report.config.clone(),
        noise_std: report.noise_std,
        metrics: report
            .results
            .iter()
            .map(|r| MetricSummary { metric: r.metric, accuracy: r.accuracy, excluded: r.excluded })
            .collect(),
        warnings: report.warnings(),
    };
    write_manifest(dir, &doc)?;

    let mut csv = String::from("sample");
    for r in &report.results {
        csv.push(',');
        csv.push_str(r.metric.name());
    }
    csv.push('\n');
    for i in 0..n {
        write!(csv, "{i}").unwrap();
        for r in &report.results {
            write!(csv, ",{:e}", r.per_sample[i]).unwrap();
        }
        csv.push('\n');
    }
    let path = dir.join(CSV);
    fs::write(&path, csv).map_err(io(&path))?;
    Ok(doc)
}
