//! Decoding and organisation of sketch corpora and MNIST-format digit data.

mod corpus;
pub mod idx;
pub mod pnm;

pub use corpus::{
    encode_sketch_pgm, load_corpus, preprocess, select_subset, Corpus, CorpusError, Provenance, Sketch, Stroke,
    DEFAULT_WORKING_RESOLUTION,
};
pub use idx::{load_idx, IdxError, IdxImages};
pub use pnm::{
    decode_pgm, decode_pgm_image, decode_ppm, encode_pgm, encode_pgm_image, encode_ppm, quantize_u8, DecodeError, GrayImage,
    RgbImage,
};
