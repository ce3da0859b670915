use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::runner::MatrixOutput;
use super::ExperimentError;
use crate::dataset::LabeledDataset;
use crate::federation::{write_checkpoints, write_round_history};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.json";
const SUMMARY_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    pub pearson_r: f64,
    /// The feature or the target has zero variance; `pearson_r` is 0.
    pub constant: bool,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of every feature column with the label.
pub fn correlation_report(ds: &LabeledDataset) -> Result<Vec<FeatureCorrelation>, ExperimentError> {
    if ds.is_empty() {
        return Err(ExperimentError::Config(
            "correlation report needs a non-empty dataset".into(),
        ));
    }
    let y: Vec<f64> = ds.labels().iter().map(|&v| f64::from(v)).collect();
    Ok(ds
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let r = pearson(&ds.column(j), &y);
            FeatureCorrelation {
                feature: name.clone(),
                pearson_r: r.unwrap_or(0.0),
                constant: r.is_none(),
            }
        })
        .collect())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: Vec<[String; N]>,
) -> Result<(), ExperimentError> {
    let io = io_err(path);
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(header).map_err(|e| io(e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

/// Writes every report file into `out_dir` and returns their paths.
///
/// All files except `timings.json` depend only on the configuration and
/// the data, so identical runs produce identical bytes.
pub fn emit_reports(out: &MatrixOutput, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    for run in &out.runs {
        let r = &run.report;
        let roc_path = out_dir.join(&r.roc_file);
        std::fs::write(&roc_path, run.roc.to_csv()).map_err(io_err(&roc_path))?;
        written.push(roc_path);
        if let Some(f) = &r.rounds_file {
            let path = out_dir.join(f);
            let federation_err = |source| ExperimentError::Federation {
                experiment: r.name.to_string(),
                source,
            };
            write_round_history(&run.rounds, &path).map_err(federation_err)?;
            written.push(path);
            if out.config.checkpoints {
                let dir = out_dir.join(format!("checkpoints_{}", r.name));
                write_checkpoints(&run.rounds, &dir).map_err(federation_err)?;
                written.push(dir);
            }
        }
    }

    let path = out_dir.join("correlations.csv");
    write_csv(
        &path,
        ["feature", "pearson_r", "constant"],
        out.correlations
            .iter()
            .map(|c| {
                [
                    c.feature.clone(),
                    c.pearson_r.to_string(),
                    c.constant.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    let path = out_dir.join("demographics.csv");
    write_csv(
        &path,
        ["column", "category", "count", "percentage"],
        out.data
            .demographics
            .iter()
            .map(|d| {
                [
                    d.column.clone(),
                    d.category.clone(),
                    d.count.to_string(),
                    d.percentage.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    let summary = json!({
        "format": SUMMARY_FORMAT,
        "config": out.config,
        "corpus": out.data.corpus,
        "dataset": out.data.full.fingerprint(),
        "train": out.data.train.fingerprint(),
        "test": out.data.test.fingerprint(),
        "partitions": out.data.partitions.iter()
            .map(|p| (p.institution_id.clone(), p.n_k))
            .collect::<BTreeMap<_, _>>(),
        "diagnostics": out.data.diagnostics,
        "scaler": out.data.scaler,
        "federated_scaler": out.data.federated_scaler,
        "experiments": out.runs.iter().map(|r| &r.report).collect::<Vec<_>>(),
    });
    let path = out_dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    written.push(path);

    let mut timings = BTreeMap::new();
    timings.insert("prepare".to_string(), out.prepare_seconds);
    for run in &out.runs {
        timings.insert(run.report.name.to_string(), run.report.wall_clock_seconds);
    }
    let path = out_dir.join(TIMINGS_FILE);
    let text = serde_json::to_string_pretty(&json!({ "wall_clock_seconds": timings }))
        .expect("timings serialize");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}
