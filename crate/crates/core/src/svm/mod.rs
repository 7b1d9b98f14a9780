//! One-vs-rest linear SVM trained by dual coordinate descent on the hinge
//! loss, plus the feature and model file formats.

mod features;
mod model;
mod solver;

pub use features::{decode_features, encode_features, load_features, save_features, sidecar_path, FeatureSet};
pub use model::{
    accuracy, decode_model, encode_model, load_model, save_model, train_ovr, train_ovr_detailed, LinearModel,
    SvmConfig, TrainingMeta,
};
pub use solver::{dual_objective, primal_objective, primal_weights, train_binary, BinarySolution, Design};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], SvmError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| SvmError::Format(format!("{} truncated at byte {}", self.what, self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, SvmError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn string(&mut self) -> Result<String, SvmError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| SvmError::Format(format!("{}: name is not UTF-8", self.what)))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, SvmError> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| SvmError::Format(format!("{}: size overflow", self.what)))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn finish(&self) -> Result<(), SvmError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(SvmError::Format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )))
        }
    }
}
