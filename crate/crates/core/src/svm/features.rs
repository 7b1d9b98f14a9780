use super::{Reader, SvmError};
use crate::net::FeatureVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Labelled feature vectors of one dimension, as written by `extract`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    dim: usize,
    classes: Vec<String>,
    labels: Vec<u32>,
    values: Vec<f32>,
    ids: Vec<String>,
    pub network_id: String,
    pub layer: String,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    network_id: String,
    layer: String,
    dim: usize,
    classes: Vec<String>,
    ids: Vec<String>,
}

impl FeatureSet {
    pub fn new(dim: usize, classes: Vec<String>) -> Self {
        Self {
            dim,
            classes,
            ..Self::default()
        }
    }

    pub fn push(&mut self, id: impl Into<String>, label: usize, values: &[f32]) -> Result<(), SvmError> {
        if values.len() != self.dim {
            return Err(SvmError::Contract(format!(
                "feature has {} values, set dimension is {}",
                values.len(),
                self.dim
            )));
        }
        if label >= self.classes.len() {
            return Err(SvmError::Contract(format!(
                "label {label} out of range for {} classes",
                self.classes.len()
            )));
        }
        self.labels.push(label as u32);
        self.values.extend_from_slice(values);
        self.ids.push(id.into());
        Ok(())
    }

    pub fn push_vector(&mut self, v: &FeatureVector, label: usize) -> Result<(), SvmError> {
        self.push(v.sketch_id.clone(), label, &v.values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::new(self.dim, self.classes.clone());
        out.network_id.clone_from(&self.network_id);
        out.layer.clone_from(&self.layer);
        for &i in indices {
            out.labels.push(self.labels[i]);
            out.values.extend_from_slice(self.vector(i));
            out.ids.push(self.ids[i].clone());
        }
        out
    }
}

const MAGIC: &[u8; 4] = b"SKFV";

/// Binary records (`SKFV`, count, dim, then label id + values per record) and
/// the JSON sidecar naming labels and records.
pub fn encode_features(set: &FeatureSet) -> (Vec<u8>, String) {
    let mut out = MAGIC.to_vec();
    out.extend((set.len() as u32).to_le_bytes());
    out.extend((set.dim as u32).to_le_bytes());
    for i in 0..set.len() {
        out.extend(set.labels[i].to_le_bytes());
        for v in set.vector(i) {
            out.extend(v.to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        network_id: set.network_id.clone(),
        layer: set.layer.clone(),
        dim: set.dim,
        classes: set.classes.clone(),
        ids: set.ids.clone(),
    };
    (out, serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n")
}

pub fn decode_features(bytes: &[u8], sidecar: &str) -> Result<FeatureSet, SvmError> {
    let side: Sidecar =
        serde_json::from_str(sidecar).map_err(|e| SvmError::Format(format!("feature sidecar: {e}")))?;
    let mut r = Reader::new(bytes, "feature file");
    if r.take(4)? != MAGIC {
        return Err(SvmError::Format("not a feature file (bad magic)".into()));
    }
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if dim != side.dim || count != side.ids.len() {
        return Err(SvmError::Format(format!(
            "feature file has {count} records of dimension {dim}, sidecar describes {} of {}",
            side.ids.len(),
            side.dim
        )));
    }
    let mut set = FeatureSet::new(dim, side.classes);
    set.network_id = side.network_id;
    set.layer = side.layer;
    for id in side.ids {
        let label = r.u32()? as usize;
        let values = r.f32s(dim)?;
        set.push(id, label, &values)
            .map_err(|e| SvmError::Format(format!("feature file: {e}")))?;
    }
    r.finish()?;
    Ok(set)
}

/// `features.bin` -> `features.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_features(set: &FeatureSet, path: &Path) -> Result<(), SvmError> {
    let (bytes, json) = encode_features(set);
    crate::fsutil::write_atomic(path, &bytes)?;
    crate::fsutil::write_atomic(&sidecar_path(path), json.as_bytes())?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<FeatureSet, SvmError> {
    let bytes = std::fs::read(path)?;
    let json = std::fs::read_to_string(sidecar_path(path))?;
    decode_features(&bytes, &json)
}
