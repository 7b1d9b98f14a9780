//! IDX (MNIST) image and label files.

use crate::raster::Raster;
use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("{file}: bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    Magic {
        file: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{file}: truncated, need {needed} bytes, have {available}")]
    Truncated {
        file: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
}

/// Decoded IDX image file; pixels are the raw `u8` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn raster(&self, i: usize) -> Raster {
        let data = self.image(i).iter().map(|&p| f32::from(p) / 255.0).collect();
        Raster::new(self.rows, self.cols, data).expect("non-empty idx image")
    }
}

fn be_u32(bytes: &[u8], at: usize, file: &'static str) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            file,
            needed: at + 4,
            available: bytes.len(),
        })
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    const FILE: &str = "images";
    let magic = be_u32(bytes, 0, FILE)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::Magic {
            file: FILE,
            found: magic,
            expected: IMAGES_MAGIC,
        });
    }
    let count = be_u32(bytes, 4, FILE)? as usize;
    let rows = be_u32(bytes, 8, FILE)? as usize;
    let cols = be_u32(bytes, 12, FILE)? as usize;
    let needed = 16 + count * rows * cols;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            file: FILE,
            needed,
            available: bytes.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..needed].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    const FILE: &str = "labels";
    let magic = be_u32(bytes, 0, FILE)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::Magic {
            file: FILE,
            found: magic,
            expected: LABELS_MAGIC,
        });
    }
    let count = be_u32(bytes, 4, FILE)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            file: FILE,
            needed,
            available: bytes.len(),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

/// Parse a matching image/label pair.
pub fn parse_pair(images: &[u8], labels: &[u8]) -> Result<(IdxImages, Vec<u8>), IdxError> {
    let images = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if images.count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    Ok((images, labels))
}

/// Decode an image/label pair into rasters scaled to `[0, 1]`.
pub fn load_idx(images: &[u8], labels: &[u8]) -> Result<Vec<(Raster, u8)>, IdxError> {
    let (images, labels) = parse_pair(images, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &label)| (images.raster(i), label))
        .collect())
}

pub fn encode_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), rows * cols, "image size mismatch");
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_image() {
        let images = encode_images(28, 28, &[vec![0; 784]]);
        let labels = encode_labels(&[7]);
        let pairs = load_idx(&images, &labels).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].1, 7);
        assert_eq!((pairs[0].0.height(), pairs[0].0.width()), (28, 28));
        assert!(pairs[0].0.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn magic_mismatch() {
        let images = encode_images(2, 2, &[vec![0; 4]]);
        let labels = encode_labels(&[1]);
        assert!(matches!(
            load_idx(&labels, &images),
            Err(IdxError::Magic { file: "images", .. })
        ));
    }

    #[test]
    fn count_mismatch_and_truncation() {
        let images = encode_images(2, 2, &[vec![0; 4], vec![1; 4]]);
        let labels = encode_labels(&[1]);
        assert_eq!(
            load_idx(&images, &labels),
            Err(IdxError::CountMismatch { images: 2, labels: 1 })
        );
        let labels = encode_labels(&[1, 2]);
        assert!(matches!(
            load_idx(&images[..images.len() - 1], &labels),
            Err(IdxError::Truncated { file: "images", .. })
        ));
        assert!(matches!(
            load_idx(&images, &labels[..9]),
            Err(IdxError::Truncated { file: "labels", .. })
        ));
        assert!(matches!(parse_labels(&[0, 0]), Err(IdxError::Truncated { .. })));
    }
}
