//! Freehand sketch recognition from tapped CNN features.
//!
//! The pipeline: decode and binarize sketches ([`sketch_io`]), thicken and
//! augment them ([`augment`]), run them through a small convolutional network
//! and read activations at a named layer ([`net`]), classify with a
//! one-vs-rest linear SVM ([`svm`]), and score with a shuffled train/test
//! ladder ([`eval`]). [`heatmap`] renders spatial activation maps.

pub mod augment;
pub mod eval;
pub mod fsutil;
pub mod heatmap;
pub mod net;
pub mod raster;
pub mod sketch_io;
pub mod svm;
pub mod synth;

pub use raster::{Raster, RasterError};

/// Independent seed for stream `index` of a master seed (SplitMix64 finalizer
/// over the combined value).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
