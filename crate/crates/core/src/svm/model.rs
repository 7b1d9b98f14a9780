use super::solver::{train_binary, BinarySolution, Design};
use super::{FeatureSet, SvmError};
use crate::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// L2-normalize every feature vector before training and prediction.
    pub normalize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_sweeps: 1000,
            seed: 0,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: SvmConfig,
    /// Per class, in model class order.
    pub sweeps: Vec<usize>,
    pub converged: Vec<bool>,
}

/// One-vs-rest linear classifier; row `k` holds `D` weights and a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<String>,
    dim: usize,
    weights: Vec<f32>,
    meta: TrainingMeta,
}

impl LinearModel {
    pub fn new(classes: Vec<String>, dim: usize, weights: Vec<f32>, meta: TrainingMeta) -> Result<Self, SvmError> {
        if classes.len() < 2 {
            return Err(SvmError::Contract(format!("a model needs >= 2 classes, got {}", classes.len())));
        }
        if weights.len() != classes.len() * (dim + 1) {
            return Err(SvmError::Contract(format!(
                "{} weights for {} classes of dimension {dim}",
                weights.len(),
                classes.len()
            )));
        }
        Ok(Self {
            classes,
            dim,
            weights,
            meta,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// Weights of class `k`, bias last.
    pub fn row(&self, k: usize) -> &[f32] {
        &self.weights[k * (self.dim + 1)..(k + 1) * (self.dim + 1)]
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// `w_k . x_hat` for every class.
    pub fn decision_values(&self, x: &[f32]) -> Result<Vec<f64>, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::Contract(format!(
                "feature has {} values, model expects {}",
                x.len(),
                self.dim
            )));
        }
        let design = Design::new(self.dim, x, self.meta.config.normalize);
        let xh = design.row(0);
        Ok((0..self.classes.len())
            .map(|k| self.row(k).iter().zip(xh).map(|(&w, &v)| f64::from(w) * v).sum())
            .collect())
    }

    /// Index of the highest decision value; ties go to the earlier class.
    pub fn predict_index(&self, x: &[f32]) -> Result<usize, SvmError> {
        let scores = self.decision_values(x)?;
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn predict(&self, x: &[f32]) -> Result<&str, SvmError> {
        Ok(&self.classes[self.predict_index(x)?])
    }
}

/// Train one binary problem per class present in `set` (in the set's class
/// order), returning the model and every binary solution.
pub fn train_ovr_detailed(set: &FeatureSet, config: &SvmConfig) -> Result<(LinearModel, Vec<BinarySolution>), SvmError> {
    if !(config.c > 0.0) || !(config.tol >= 0.0) {
        return Err(SvmError::Contract(format!(
            "need C > 0 and tol >= 0, got C={} tol={}",
            config.c, config.tol
        )));
    }
    let mut present = vec![false; set.classes().len()];
    for &l in set.labels() {
        present[l as usize] = true;
    }
    let kept: Vec<usize> = (0..present.len()).filter(|&k| present[k]).collect();
    if kept.len() < 2 {
        return Err(SvmError::Contract(format!(
            "training needs >= 2 distinct labels, got {}",
            kept.len()
        )));
    }
    let design = Design::new(set.dim(), set.values(), config.normalize);
    let solutions: Vec<BinarySolution> = kept
        .par_iter()
        .map(|&k| {
            let y: Vec<f64> = set
                .labels()
                .iter()
                .map(|&l| if l as usize == k { 1.0 } else { -1.0 })
                .collect();
            train_binary(&design, &y, config.c, config.tol, config.max_sweeps, derive_seed(config.seed, k as u64))
        })
        .collect();
    let weights = solutions.iter().flat_map(|s| s.w.iter().map(|&v| v as f32)).collect();
    let meta = TrainingMeta {
        config: config.clone(),
        sweeps: solutions.iter().map(|s| s.sweeps).collect(),
        converged: solutions.iter().map(|s| s.converged).collect(),
    };
    let classes = kept.iter().map(|&k| set.classes()[k].clone()).collect();
    Ok((LinearModel::new(classes, set.dim(), weights, meta)?, solutions))
}

pub fn train_ovr(set: &FeatureSet, config: &SvmConfig) -> Result<LinearModel, SvmError> {
    Ok(train_ovr_detailed(set, config)?.0)
}

/// Fraction of records in `set` whose predicted class name equals their label.
pub fn accuracy(model: &LinearModel, set: &FeatureSet) -> Result<f64, SvmError> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let hits = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let p = model.predict_index(set.vector(i))?;
            Ok(usize::from(model.classes()[p] == set.classes()[set.label(i) as usize]))
        })
        .collect::<Result<Vec<_>, SvmError>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / set.len() as f64)
}

const MAGIC: &[u8; 4] = b"SKLM";

/// Magic `SKLM`, class count, dimension, length-prefixed class names, the
/// `K x (D+1)` weights, then a length-prefixed metadata JSON blob.
pub fn encode_model(model: &LinearModel) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend((model.classes.len() as u32).to_le_bytes());
    out.extend((model.dim as u32).to_le_bytes());
    for c in &model.classes {
        out.extend((c.len() as u32).to_le_bytes());
        out.extend(c.as_bytes());
    }
    for w in &model.weights {
        out.extend(w.to_le_bytes());
    }
    let meta = serde_json::to_vec(&model.meta).expect("metadata serializes");
    out.extend((meta.len() as u32).to_le_bytes());
    out.extend(meta);
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<LinearModel, SvmError> {
    let mut r = super::Reader::new(bytes, "model file");
    if r.take(4)? != MAGIC {
        return Err(SvmError::Format("not a model file (bad magic)".into()));
    }
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let classes = (0..k).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let count = k
        .checked_mul(dim + 1)
        .ok_or_else(|| SvmError::Format("model dimensions overflow".into()))?;
    let weights = r.f32s(count)?;
    let len = r.u32()? as usize;
    let meta: TrainingMeta = serde_json::from_slice(r.take(len)?)
        .map_err(|e| SvmError::Format(format!("model metadata: {e}")))?;
    r.finish()?;
    LinearModel::new(classes, dim, weights, meta)
}

pub fn save_model(model: &LinearModel, path: &Path) -> Result<(), SvmError> {
    crate::fsutil::write_atomic(path, &encode_model(model)).map_err(SvmError::Io)
}

pub fn load_model(path: &Path) -> Result<LinearModel, SvmError> {
    decode_model(&std::fs::read(path)?)
}
