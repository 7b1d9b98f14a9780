use super::{decode_state, read_weight_records, LayerKind, LayerSpec, NetError, NetworkSpec, NetworkState};
use std::path::Path;

pub const LENET_MODIFIED: &str = "lenet-modified";
pub const IMAGENET_SHAPE: &str = "imagenet-shape";

fn conv(name: &str, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> LayerSpec {
    LayerSpec::new(
        name,
        LayerKind::Conv {
            out_channels,
            kernel,
            stride,
            pad,
        },
    )
}

fn pool(name: &str, window: usize, stride: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::MaxPool { window, stride })
}

fn ip(name: &str, out_units: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::InnerProduct { out_units })
}

fn relu(name: &str) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Relu)
}

/// `1x28x28 -> conv1(20, 5x5) -> pool1(2/2) -> conv2(50, 5x5) -> pool2(2/2)
/// -> ip1(500) -> relu1 -> ip2(num_classes) -> loss`.
pub fn preset_lenet_modified(num_classes: usize) -> Result<NetworkSpec, NetError> {
    if num_classes < 2 {
        return Err(NetError::InvalidSpec(format!("need >= 2 classes, got {num_classes}")));
    }
    NetworkSpec::new(
        [1, 28, 28],
        vec![
            conv("conv1", 20, 5, 1, 0),
            pool("pool1", 2, 2),
            conv("conv2", 50, 5, 1, 0),
            pool("pool2", 2, 2),
            ip("ip1", 500),
            relu("relu1"),
            ip("ip2", num_classes),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
        ],
    )
}

/// Five convolutional stages and three fully connected layers on a
/// `3x227x227` input; `fc7` is 4096 wide. Structure only, no grouping or
/// response normalization.
pub fn preset_imagenet_shape(num_classes: usize) -> Result<NetworkSpec, NetError> {
    if num_classes < 2 {
        return Err(NetError::InvalidSpec(format!("need >= 2 classes, got {num_classes}")));
    }
    NetworkSpec::new(
        [3, 227, 227],
        vec![
            conv("conv1", 96, 11, 4, 0),
            relu("relu1"),
            pool("pool1", 3, 2),
            conv("conv2", 256, 5, 1, 2),
            relu("relu2"),
            pool("pool2", 3, 2),
            conv("conv3", 384, 3, 1, 1),
            relu("relu3"),
            conv("conv4", 384, 3, 1, 1),
            relu("relu4"),
            conv("conv5", 256, 3, 1, 1),
            relu("relu5"),
            pool("pool5", 3, 2),
            ip("fc6", 4096),
            relu("relu6"),
            ip("fc7", 4096),
            relu("relu7"),
            ip("fc8", num_classes),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
        ],
    )
}

/// Look up a preset by its CLI name.
pub fn preset(name: &str, num_classes: usize) -> Result<NetworkSpec, NetError> {
    match name {
        LENET_MODIFIED => preset_lenet_modified(num_classes),
        IMAGENET_SHAPE => preset_imagenet_shape(num_classes),
        other => Err(NetError::InvalidSpec(format!(
            "unknown network preset `{other}` (expected {LENET_MODIFIED} or {IMAGENET_SHAPE})"
        ))),
    }
}

/// Resolve `net` (a preset name or a descriptor JSON path) and load its
/// weights. Presets take their class count from the bias of the last
/// parametric layer in the weight file.
pub fn load_network(net: &str, weights: &Path) -> Result<(NetworkSpec, NetworkState), NetError> {
    let bytes = std::fs::read(weights).map_err(|e| {
        NetError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", weights.display())))
    })?;
    let spec = if net == LENET_MODIFIED || net == IMAGENET_SHAPE {
        let records = read_weight_records(&bytes)?;
        let (_, last) = records
            .last()
            .ok_or_else(|| NetError::Format("weight file has no layers".into()))?;
        preset(net, last.bias.len())?
    } else {
        let text = std::fs::read_to_string(net).map_err(|e| {
            NetError::InvalidSpec(format!(
                "`{net}` is neither a preset ({LENET_MODIFIED}, {IMAGENET_SHAPE}) nor a readable descriptor: {e}"
            ))
        })?;
        NetworkSpec::from_json(&text)?
    };
    let state = decode_state(&spec, &bytes)?;
    Ok((spec, state))
}
