use super::{EvalError, ExperimentConfig};
use crate::fsutil::write_atomic;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub ladder: usize,
    pub shuffle: usize,
    pub precision: f64,
    pub train_count: usize,
    pub test_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderMean {
    pub ladder: usize,
    pub mean_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub categories: Vec<String>,
    pub plan_size: usize,
    pub feature_dim: usize,
    /// Ordered by shuffle, then ladder point.
    pub runs: Vec<RunResult>,
    /// In ladder order.
    pub means: Vec<LadderMean>,
}

/// Wall-clock seconds per stage. Kept out of the report so that reports of
/// identical runs are byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: Vec<(String, f64)>,
}

impl StageTimings {
    pub fn record(&mut self, stage: &str, seconds: f64) {
        match self.stages.iter_mut().find(|(s, _)| s == stage) {
            Some((_, total)) => *total += seconds,
            None => self.stages.push((stage.to_string(), seconds)),
        }
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|(s, _)| s == stage).map(|&(_, t)| t)
    }
}

const HEADER: &str = "ladder,shuffle,precision,train_count,test_count";

impl EvaluationReport {
    /// Assemble from per-run results; means are plain averages over shuffles.
    pub fn new(
        config: ExperimentConfig,
        categories: Vec<String>,
        plan_size: usize,
        feature_dim: usize,
        runs: Vec<RunResult>,
    ) -> Self {
        let means = config
            .ladder
            .iter()
            .map(|&t| {
                let ps: Vec<f64> = runs.iter().filter(|r| r.ladder == t).map(|r| r.precision).collect();
                LadderMean {
                    ladder: t,
                    mean_precision: ps.iter().sum::<f64>() / ps.len().max(1) as f64,
                }
            })
            .collect();
        Self {
            config,
            categories,
            plan_size,
            feature_dim,
            runs,
            means,
        }
    }

    pub fn mean(&self, ladder: usize) -> Option<f64> {
        self.means.iter().find(|m| m.ladder == ladder).map(|m| m.mean_precision)
    }

    /// One row per run; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.ladder, r.shuffle, r.precision, r.train_count, r.test_count
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<RunResult>, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(EvalError::Contract(format!("report CSV must start with `{HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || EvalError::Contract(format!("report CSV line {}: `{line}`", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(RunResult {
                ladder: f[0].parse().map_err(|_| bad())?,
                shuffle: f[1].parse().map_err(|_| bad())?,
                precision: f[2].parse().map_err(|_| bad())?,
                train_count: f[3].parse().map_err(|_| bad())?,
                test_count: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// `(csv, json, timings)` paths for a report path: `r.csv` gives `r.csv`,
/// `r.json` and `r.timings.json`.
pub fn report_paths(path: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let json = path.with_extension("json");
    let timings = path.with_extension("timings.json");
    (path.to_path_buf(), json, timings)
}

pub fn write_report(report: &EvaluationReport, timings: &StageTimings, path: &Path) -> Result<(), EvalError> {
    let (csv, json, times) = report_paths(path);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_atomic(&csv, report.to_csv().as_bytes())?;
    write_atomic(&json, report.to_json().as_bytes())?;
    let t = serde_json::to_string_pretty(timings).expect("timings serialize") + "\n";
    write_atomic(&times, t.as_bytes())?;
    Ok(())
}
