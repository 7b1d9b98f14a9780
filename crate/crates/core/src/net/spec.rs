use super::NetError;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    /// Square-kernel cross-correlation with zero padding.
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    /// Fully connected; flattens its input.
    InnerProduct {
        out_units: usize,
    },
    Relu,
    /// Softmax over the flattened input; its forward output is the
    /// probability vector, the loss is computed in the backward pass.
    SoftmaxLoss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self.kind, LayerKind::Conv { .. } | LayerKind::InnerProduct { .. })
    }
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    input: [usize; 3],
    layers: Vec<LayerSpec>,
}

/// Validated ordered layer graph with inferred per-layer shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    /// Output shape of each layer (without batch axis).
    shapes: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>) -> Result<Self, NetError> {
        if input_shape.contains(&0) {
            return Err(NetError::InvalidSpec(format!(
                "input shape {input_shape:?} has a zero extent"
            )));
        }
        let mut seen = HashSet::new();
        for l in &layers {
            if !seen.insert(l.name.as_str()) {
                return Err(NetError::InvalidSpec(format!("duplicate layer name `{}`", l.name)));
            }
        }
        if let Some(i) = layers
            .iter()
            .position(|l| l.kind == LayerKind::SoftmaxLoss)
        {
            if i + 1 != layers.len() {
                return Err(NetError::InvalidSpec(
                    "softmax loss must be the single, last layer".into(),
                ));
            }
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.to_vec();
        for l in &layers {
            current = infer(l, &current)?;
            shapes.push(current.clone());
        }
        Ok(Self {
            input_shape,
            layers,
            shapes,
        })
    }

    /// Parse a JSON descriptor: `{"input": [c, h, w], "layers": [...]}`.
    pub fn from_json(json: &str) -> Result<Self, NetError> {
        let d: Descriptor = serde_json::from_str(json)
            .map_err(|e| NetError::InvalidSpec(format!("bad network descriptor: {e}")))?;
        Self::new(d.input, d.layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Descriptor {
            input: self.input_shape,
            layers: self.layers.clone(),
        })
        .expect("descriptor serializes")
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &LayerSpec {
        &self.layers[index]
    }

    pub fn output_shape(&self, index: usize) -> &[usize] {
        &self.shapes[index]
    }

    pub fn output_len(&self, index: usize) -> usize {
        self.shapes[index].iter().product()
    }

    /// Shape of the tensor feeding layer `index`.
    pub fn layer_input_shape(&self, index: usize) -> &[usize] {
        if index == 0 {
            &self.input_shape
        } else {
            &self.shapes[index - 1]
        }
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, NetError> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| NetError::UnknownLayer {
                name: name.to_string(),
                valid: self.layer_names(),
            })
    }

    pub fn ends_in_softmax(&self) -> bool {
        self.layers.last().is_some_and(|l| l.kind == LayerKind::SoftmaxLoss)
    }

    /// Number of output classes when the network ends in softmax.
    pub fn num_classes(&self) -> Option<usize> {
        self.ends_in_softmax()
            .then(|| self.output_len(self.layers.len() - 1))
    }

    /// `(weight shape, bias shape)` for parametric layers.
    pub fn param_shapes(&self, index: usize) -> Option<(Vec<usize>, Vec<usize>)> {
        let input = self.layer_input_shape(index);
        match self.layers[index].kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, input[0], kernel, kernel], vec![out_channels])),
            LayerKind::InnerProduct { out_units } => {
                Some((vec![out_units, input.iter().product()], vec![out_units]))
            }
            _ => None,
        }
    }

    pub fn parametric_layers(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.is_parametric())
    }

    pub fn num_params(&self) -> usize {
        self.parametric_layers()
            .map(|(i, _)| {
                let (w, b) = self.param_shapes(i).expect("parametric");
                w.iter().product::<usize>() + b.iter().product::<usize>()
            })
            .sum()
    }

    /// Layers whose output keeps a `C x H x W` layout.
    pub fn spatial_layers(&self) -> Vec<String> {
        self.layers
            .iter()
            .zip(&self.shapes)
            .filter(|(l, s)| {
                s.len() == 3 && matches!(l.kind, LayerKind::Conv { .. } | LayerKind::MaxPool { .. } | LayerKind::Relu)
            })
            .map(|(l, _)| l.name.clone())
            .collect()
    }
}

fn infer(layer: &LayerSpec, input: &[usize]) -> Result<Vec<usize>, NetError> {
    let err = |detail: String| NetError::Shape {
        layer: layer.name.clone(),
        detail,
    };
    match layer.kind {
        LayerKind::Conv {
            out_channels,
            kernel,
            stride,
            pad,
        } => {
            if out_channels == 0 || kernel == 0 || stride == 0 {
                return Err(err("out_channels, kernel and stride must be >= 1".into()));
            }
            let [_, h, w] = spatial(input).ok_or_else(|| err(format!("expects C x H x W input, got {input:?}")))?;
            if h + 2 * pad < kernel || w + 2 * pad < kernel {
                return Err(err(format!(
                    "kernel {kernel} exceeds padded input {}x{}",
                    h + 2 * pad,
                    w + 2 * pad
                )));
            }
            Ok(vec![
                out_channels,
                (h + 2 * pad - kernel) / stride + 1,
                (w + 2 * pad - kernel) / stride + 1,
            ])
        }
        LayerKind::MaxPool { window, stride } => {
            if window == 0 || stride == 0 {
                return Err(err("window and stride must be >= 1".into()));
            }
            let [c, h, w] = spatial(input).ok_or_else(|| err(format!("expects C x H x W input, got {input:?}")))?;
            if window > h || window > w {
                return Err(err(format!("window {window} larger than input {h}x{w}")));
            }
            Ok(vec![c, (h - window) / stride + 1, (w - window) / stride + 1])
        }
        LayerKind::InnerProduct { out_units } => {
            if out_units == 0 {
                return Err(err("out_units must be >= 1".into()));
            }
            Ok(vec![out_units])
        }
        LayerKind::Relu => Ok(input.to_vec()),
        LayerKind::SoftmaxLoss => {
            let k: usize = input.iter().product();
            if k < 2 {
                return Err(err(format!("softmax needs >= 2 classes, got {k}")));
            }
            Ok(vec![k])
        }
    }
}

fn spatial(shape: &[usize]) -> Option<[usize; 3]> {
    match *shape {
        [c, h, w] => Some([c, h, w]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(name: &str, o: usize, k: usize, s: usize, p: usize) -> LayerSpec {
        LayerSpec::new(
            name,
            LayerKind::Conv {
                out_channels: o,
                kernel: k,
                stride: s,
                pad: p,
            },
        )
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = NetworkSpec::new([1, 8, 8], vec![conv("a", 1, 3, 1, 0), conv("a", 1, 3, 1, 0)]);
        assert!(matches!(err, Err(NetError::InvalidSpec(_))));
    }

    #[test]
    fn softmax_must_be_last() {
        let layers = vec![
            LayerSpec::new("ip", LayerKind::InnerProduct { out_units: 3 }),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
            LayerSpec::new("relu", LayerKind::Relu),
        ];
        assert!(NetworkSpec::new([1, 2, 2], layers).is_err());
    }

    #[test]
    fn oversized_kernel_names_layer() {
        let err = NetworkSpec::new([1, 4, 4], vec![conv("big", 2, 5, 1, 0)]).unwrap_err();
        assert!(matches!(err, NetError::Shape { ref layer, .. } if layer == "big"));
        assert!(NetworkSpec::new([1, 4, 4], vec![conv("ok", 2, 5, 1, 1)]).is_ok());
    }

    #[test]
    fn descriptor_round_trip() {
        let spec = NetworkSpec::new(
            [1, 10, 10],
            vec![
                conv("c", 3, 3, 1, 1),
                LayerSpec::new("p", LayerKind::MaxPool { window: 2, stride: 2 }),
                LayerSpec::new("r", LayerKind::Relu),
                LayerSpec::new("ip", LayerKind::InnerProduct { out_units: 4 }),
                LayerSpec::new("loss", LayerKind::SoftmaxLoss),
            ],
        )
        .unwrap();
        let json = spec.to_json();
        assert!(json.contains(r#""kind": "max_pool""#));
        assert_eq!(NetworkSpec::from_json(&json).unwrap(), spec);
        assert_eq!(spec.output_shape(1), &[3, 5, 5]);
        assert_eq!(spec.num_classes(), Some(4));
        assert_eq!(spec.param_shapes(3).unwrap(), (vec![4, 75], vec![4]));
        assert_eq!(spec.spatial_layers(), vec!["c", "p", "r"]);
    }

    #[test]
    fn unknown_layer_lists_valid_names() {
        let spec = NetworkSpec::new([1, 3, 3], vec![conv("only", 1, 3, 1, 0)]).unwrap();
        let err = spec.index_of("nope").unwrap_err();
        assert!(err.to_string().contains("only"), "{err}");
    }
}
