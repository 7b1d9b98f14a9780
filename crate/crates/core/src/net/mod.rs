//! A small convolutional network engine: layer descriptors, batched forward
//! and backward passes, SGD training, weight files and feature taps.

mod engine;
mod features;
mod kernels;
mod presets;
mod spec;
mod state;
mod tensor;
mod train;

pub use engine::{backward, forward, Activations, Gradients};
pub use features::{raster_to_input, tap_features, FeatureTap, FeatureVector};
pub use kernels::{conv2d_forward, inner_product_forward, maxpool_forward, softmax, softmax_loss};
pub use presets::{load_network, preset, preset_imagenet_shape, preset_lenet_modified, IMAGENET_SHAPE, LENET_MODIFIED};
pub use spec::{LayerKind, LayerSpec, NetworkSpec};
pub use state::{decode_state, encode_state, load_state, read_weight_records, save_state, LayerParams, NetworkState};
pub use tensor::Tensor;
pub use train::{accuracy, predict, train_sgd, train_sgd_observed, LabeledSet, LrPolicy, Sgd, SgdConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape error at layer `{layer}`: {detail}")]
    Shape { layer: String, detail: String },
    #[error("unknown layer `{name}`; valid layers: {}", valid.join(", "))]
    UnknownLayer { name: String, valid: Vec<String> },
    #[error("invalid network: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Contract(String),
    #[error("weight file: {0}")]
    Format(String),
    #[error("layer `{layer}` does not match: {detail}")]
    LayerMismatch { layer: String, detail: String },
    #[error("training diverged (non-finite loss) at iteration {iteration}")]
    Diverged { iteration: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
