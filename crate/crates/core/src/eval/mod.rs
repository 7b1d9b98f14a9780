//! The shuffled train/test ladder: for every shuffle and every training size
//! `t`, train a linear SVM on augmented variants of `t` sketches per category
//! and score it on the dilated remainder.

mod report;
mod run;
mod split;

pub use report::{parse_csv, report_paths, write_report, EvaluationReport, LadderMean, RunResult, StageTimings};
pub use run::{run_experiment, run_on, shuffle_seed, FeatureBank};
pub use split::{make_splits, test_records, training_records, Record, SketchRef, Split};

use crate::augment::AugmentError;
use crate::net::NetError;
use crate::sketch_io::CorpusError;
use crate::svm::{SvmConfig, SvmError};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Plan name meaning "no augmentation": train on dilated originals only.
pub const NO_PLAN: &str = "none";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus_root: PathBuf,
    pub working_resolution: usize,
    pub per_category: usize,
    /// `paper30`, a JSON plan path, or `none`.
    pub plan: String,
    /// Network preset name or descriptor path.
    pub network: String,
    pub weights: PathBuf,
    pub layer: String,
    pub ladder: Vec<usize>,
    pub shuffles: usize,
    /// `seed` is ignored; each SVM gets a seed derived from the master seed.
    pub svm: SvmConfig,
    pub seed: u64,
    pub include_dilated_original_in_train: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus_root: PathBuf::new(),
            working_resolution: crate::sketch_io::DEFAULT_WORKING_RESOLUTION,
            per_category: 56,
            plan: crate::augment::PAPER30.to_string(),
            network: crate::net::LENET_MODIFIED.to_string(),
            weights: PathBuf::new(),
            layer: "ip1".to_string(),
            ladder: vec![8, 16, 24, 32, 40, 48],
            shuffles: 3,
            svm: SvmConfig::default(),
            seed: 0,
            include_dilated_original_in_train: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Config(m));
        if self.shuffles == 0 {
            return bad("shuffles must be >= 1".into());
        }
        if self.ladder.is_empty() {
            return bad("ladder is empty".into());
        }
        if let Some(&t) = self.ladder.iter().find(|&&t| t == 0 || t >= self.per_category) {
            return bad(format!("ladder value {t} outside 1..{}", self.per_category));
        }
        if self.working_resolution < 8 {
            return bad(format!("working resolution {} is too small", self.working_resolution));
        }
        if !(self.svm.c > 0.0 && self.svm.tol > 0.0) {
            return bad("svm c and tol must be positive".into());
        }
        Ok(())
    }

    /// Dilated originals join the training side when asked to, and always
    /// when there is no augmentation plan.
    pub fn trains_on_originals(&self) -> bool {
        self.include_dilated_original_in_train || self.plan == NO_PLAN
    }
}

/// Fraction of positions where `predictions` equals `truth`.
pub fn compute_precision<T: PartialEq>(predictions: &[T], truth: &[T]) -> Result<f64, EvalError> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(EvalError::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
