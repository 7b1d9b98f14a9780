//! Batched forward and backward passes over a [`NetworkSpec`].

use super::kernels::{
    col2im_add, conv_sample, gemm_acc, im2col, inner_product_batch, maxpool_sample, narrow,
    softmax_f64, transpose, widen, ConvGeom,
};
use super::{LayerKind, LayerParams, NetError, NetworkSpec, NetworkState, Tensor};
use std::collections::BTreeMap;

/// Outputs of every computed layer, each with a leading batch axis.
#[derive(Debug, Clone)]
pub struct Activations {
    batch: usize,
    names: Vec<String>,
    input: Tensor,
    outputs: Vec<Tensor>,
    /// Per layer: flat argmax indices for pooling layers, empty otherwise.
    argmax: Vec<Vec<u32>>,
}

impl Activations {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Number of layers that were computed.
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn input(&self) -> &Tensor {
        &self.input
    }

    pub fn get(&self, layer: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == layer).map(|i| &self.outputs[i])
    }

    /// Output of `layer` for batch element `index`.
    pub fn sample(&self, layer: &str, index: usize) -> Option<&[f32]> {
        self.get(layer).map(|t| t.outer(index))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.outputs)
    }

    pub(crate) fn output(&self, index: usize) -> &Tensor {
        &self.outputs[index]
    }

    fn layer_input(&self, index: usize) -> &Tensor {
        if index == 0 {
            &self.input
        } else {
            &self.outputs[index - 1]
        }
    }
}

/// Run the network on `input` (`C x H x W`, or `B x C x H x W`). With `tap`,
/// stops after the named layer.
pub fn forward(
    spec: &NetworkSpec,
    state: &NetworkState,
    input: &Tensor,
    tap: Option<&str>,
) -> Result<Activations, NetError> {
    let last = match tap {
        Some(name) => spec.index_of(name)?,
        None => spec.layers().len().checked_sub(1).ok_or_else(|| {
            NetError::InvalidSpec("network has no layers".into())
        })?,
    };
    let expected = spec.input_shape();
    let batch = match input.shape() {
        s if s == expected => 1,
        [b, rest @ ..] if rest == expected => *b,
        s => {
            return Err(NetError::Shape {
                layer: "input".into(),
                detail: format!("expected {expected:?} (optionally batched), got {s:?}"),
            })
        }
    };
    state.validate(spec)?;
    Ok(forward_batch(spec, state, input.data(), batch, last))
}

/// Unchecked batched forward through layers `0..=last`.
pub(crate) fn forward_batch(
    spec: &NetworkSpec,
    state: &NetworkState,
    data: &[f32],
    batch: usize,
    last: usize,
) -> Activations {
    let mut shape = vec![batch];
    shape.extend_from_slice(&spec.input_shape());
    let input = Tensor::new(shape, data.to_vec()).expect("input length checked by caller");

    let mut names = Vec::with_capacity(last + 1);
    let mut outputs: Vec<Tensor> = Vec::with_capacity(last + 1);
    let mut argmax = Vec::with_capacity(last + 1);
    let mut scratch = Vec::new();
    let mut acc = Vec::new();

    for index in 0..=last {
        let layer = spec.layer(index);
        let x = if index == 0 { &input } else { &outputs[index - 1] };
        let in_shape = spec.layer_input_shape(index);
        let in_len: usize = in_shape.iter().product();
        let out_len = spec.output_len(index);
        let mut out_shape = vec![batch];
        out_shape.extend_from_slice(spec.output_shape(index));
        let mut out = Tensor::zeros(&out_shape);
        let mut arg = Vec::new();

        match layer.kind {
            LayerKind::Conv {
                kernel, stride, pad, ..
            } => {
                let p = state.expect(&layer.name);
                let g = ConvGeom::new([in_shape[0], in_shape[1], in_shape[2]], kernel, stride, pad);
                let mut w64 = Vec::new();
                widen(p.weight.data(), &mut w64);
                for b in 0..batch {
                    conv_sample(
                        &x.data()[b * in_len..(b + 1) * in_len],
                        &g,
                        &w64,
                        p.bias.data(),
                        &mut scratch,
                        &mut acc,
                        &mut out.data_mut()[b * out_len..(b + 1) * out_len],
                    );
                }
            }
            LayerKind::MaxPool { window, stride } => {
                arg = vec![0u32; batch * out_len];
                for b in 0..batch {
                    maxpool_sample(
                        &x.data()[b * in_len..(b + 1) * in_len],
                        [in_shape[0], in_shape[1], in_shape[2]],
                        window,
                        stride,
                        &mut out.data_mut()[b * out_len..(b + 1) * out_len],
                        &mut arg[b * out_len..(b + 1) * out_len],
                    );
                }
            }
            LayerKind::InnerProduct { .. } => {
                let p = state.expect(&layer.name);
                inner_product_batch(x.data(), batch, p.weight.data(), p.bias.data(), out.data_mut());
            }
            LayerKind::Relu => {
                for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
                    *o = v.max(0.0);
                }
            }
            LayerKind::SoftmaxLoss => {
                for b in 0..batch {
                    let (_, p) = softmax_f64(&x.data()[b * in_len..(b + 1) * in_len], 0);
                    for (o, v) in out.data_mut()[b * out_len..(b + 1) * out_len].iter_mut().zip(p) {
                        *o = v as f32;
                    }
                }
            }
        }
        names.push(layer.name.clone());
        outputs.push(out);
        argmax.push(arg);
    }
    Activations {
        batch,
        names,
        input,
        outputs,
        argmax,
    }
}

/// Gradients of the batch-mean softmax loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub params: BTreeMap<String, LayerParams>,
    /// Gradient with respect to the network input, same shape as the input.
    pub input: Tensor,
}

/// `f64` parameter gradients in layer order, as used by the optimizer.
pub(crate) struct RawGradients {
    pub loss: f64,
    /// `(layer index, weight grad, bias grad)`.
    pub params: Vec<(usize, Vec<f64>, Vec<f64>)>,
    pub input: Option<Vec<f32>>,
}

pub fn backward(
    spec: &NetworkSpec,
    state: &NetworkState,
    activations: &Activations,
    labels: &[usize],
) -> Result<Gradients, NetError> {
    check_backward(spec, state, activations, labels)?;
    let raw = backward_raw(spec, state, activations, labels, true);
    let mut params = BTreeMap::new();
    for (index, w, b) in raw.params {
        let (ws, bs) = spec.param_shapes(index).expect("parametric layer");
        let to32 = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect();
        params.insert(
            spec.layer(index).name.clone(),
            LayerParams {
                weight: Tensor::new(ws, to32(w))?,
                bias: Tensor::new(bs, to32(b))?,
            },
        );
    }
    let input = Tensor::new(
        activations.input.shape().to_vec(),
        raw.input.expect("input gradient requested"),
    )?;
    Ok(Gradients {
        loss: raw.loss,
        params,
        input,
    })
}

pub(crate) fn check_backward(
    spec: &NetworkSpec,
    state: &NetworkState,
    activations: &Activations,
    labels: &[usize],
) -> Result<(), NetError> {
    let k = spec
        .num_classes()
        .ok_or_else(|| NetError::Contract("backward needs a network ending in softmax loss".into()))?;
    if activations.len() != spec.layers().len() {
        return Err(NetError::Contract(format!(
            "activations cover {} of {} layers; run a full forward pass first",
            activations.len(),
            spec.layers().len()
        )));
    }
    if labels.len() != activations.batch {
        return Err(NetError::Contract(format!(
            "{} labels for a batch of {}",
            labels.len(),
            activations.batch
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(NetError::Contract(format!("label {bad} out of range for {k} classes")));
    }
    state.validate(spec)
}

pub(crate) fn backward_raw(
    spec: &NetworkSpec,
    state: &NetworkState,
    acts: &Activations,
    labels: &[usize],
    need_input: bool,
) -> RawGradients {
    let batch = acts.batch;
    let n_layers = spec.layers().len();
    let mut params = Vec::new();
    let mut loss = 0f64;
    let mut grad: Vec<f32> = Vec::new();

    for index in (0..n_layers).rev() {
        let layer = spec.layer(index);
        let x = acts.layer_input(index);
        let in_shape = spec.layer_input_shape(index);
        let in_len: usize = in_shape.iter().product();
        let out_len = spec.output_len(index);
        let want_input = index > 0 || need_input;

        match layer.kind {
            LayerKind::SoftmaxLoss => {
                let inv = 1.0 / batch as f64;
                grad = vec![0f32; batch * in_len];
                for (b, &label) in labels.iter().enumerate() {
                    let (l, p) = softmax_f64(&x.data()[b * in_len..(b + 1) * in_len], label);
                    loss += l * inv;
                    for (k, (g, pk)) in grad[b * in_len..(b + 1) * in_len].iter_mut().zip(p).enumerate() {
                        let target = if k == label { 1.0 } else { 0.0 };
                        *g = ((pk - target) * inv) as f32;
                    }
                }
            }
            LayerKind::Relu => {
                for (g, &v) in grad.iter_mut().zip(x.data()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            LayerKind::MaxPool { .. } => {
                let arg = &acts.argmax[index];
                let mut next = vec![0f32; batch * in_len];
                let mut acc = vec![0f64; in_len];
                for b in 0..batch {
                    acc.fill(0.0);
                    for (&g, &a) in grad[b * out_len..(b + 1) * out_len]
                        .iter()
                        .zip(&arg[b * out_len..(b + 1) * out_len])
                    {
                        acc[a as usize] += f64::from(g);
                    }
                    for (d, &v) in next[b * in_len..(b + 1) * in_len].iter_mut().zip(&acc) {
                        *d = v as f32;
                    }
                }
                grad = next;
            }
            LayerKind::InnerProduct { out_units } => {
                let p = state.expect(&layer.name);
                let dim = in_len;
                let (mut g64, mut gt, mut x64) = (Vec::new(), Vec::new(), Vec::new());
                widen(&grad, &mut g64);
                transpose(&g64, batch, out_units, &mut gt);
                widen(x.data(), &mut x64);
                let mut dw = vec![0f64; out_units * dim];
                gemm_acc(out_units, dim, batch, &gt, &x64, &mut dw);
                let db = gt.chunks_exact(batch).map(|row| row.iter().sum()).collect();
                if want_input {
                    let mut w64 = Vec::new();
                    widen(p.weight.data(), &mut w64);
                    let mut dx = vec![0f64; batch * dim];
                    gemm_acc(batch, dim, out_units, &g64, &w64, &mut dx);
                    grad = vec![0f32; batch * dim];
                    narrow(&dx, &mut grad);
                }
                params.push((index, dw, db));
            }
            LayerKind::Conv {
                out_channels,
                kernel,
                stride,
                pad,
            } => {
                let p = state.expect(&layer.name);
                let g = ConvGeom::new([in_shape[0], in_shape[1], in_shape[2]], kernel, stride, pad);
                let (depth, n) = (g.patch_len(), g.positions());
                let mut dw = vec![0f64; out_channels * depth];
                let mut db = vec![0f64; out_channels];
                let mut next = if want_input { vec![0f32; batch * in_len] } else { Vec::new() };
                let mut wt = Vec::new();
                if want_input {
                    let mut w64 = Vec::new();
                    widen(p.weight.data(), &mut w64);
                    transpose(&w64, out_channels, depth, &mut wt);
                }
                let (mut cols, mut cols_t, mut g64) = (Vec::new(), Vec::new(), Vec::new());
                let mut dcols = Vec::new();
                let mut dx = vec![0f64; if want_input { in_len } else { 0 }];
                for b in 0..batch {
                    im2col(&x.data()[b * in_len..(b + 1) * in_len], &g, &mut cols);
                    transpose(&cols, depth, n, &mut cols_t);
                    widen(&grad[b * out_len..(b + 1) * out_len], &mut g64);
                    for (d, row) in db.iter_mut().zip(g64.chunks_exact(n)) {
                        *d += row.iter().sum::<f64>();
                    }
                    gemm_acc(out_channels, depth, n, &g64, &cols_t, &mut dw);
                    if want_input {
                        dcols.clear();
                        dcols.resize(depth * n, 0.0);
                        gemm_acc(depth, n, out_channels, &wt, &g64, &mut dcols);
                        dx.fill(0.0);
                        col2im_add(&dcols, &g, &mut dx);
                        narrow(&dx, &mut next[b * in_len..(b + 1) * in_len]);
                    }
                }
                if want_input {
                    grad = next;
                }
                params.push((index, dw, db));
            }
        }
    }
    params.reverse();
    RawGradients {
        loss,
        params,
        input: need_input.then_some(grad),
    }
}
