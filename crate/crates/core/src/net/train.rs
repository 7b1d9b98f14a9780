//! Mini-batch SGD with momentum and weight decay.

use super::engine::{backward_raw, forward_batch, Gradients};
use super::{NetError, NetworkSpec, NetworkState};
use crate::raster::Raster;
use crate::sketch_io::IdxImages;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum LrPolicy {
    Fixed,
    /// `lr * (1 + gamma * iter)^(-power)`.
    Inv { gamma: f64, power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub iterations: u64,
    pub lr_policy: LrPolicy,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch: 64,
            iterations: 10_000,
            lr_policy: LrPolicy::Inv {
                gamma: 1e-4,
                power: 0.75,
            },
        }
    }
}

impl SgdConfig {
    pub fn learning_rate(&self, iteration: u64) -> f64 {
        match self.lr_policy {
            LrPolicy::Fixed => self.lr,
            LrPolicy::Inv { gamma, power } => self.lr * (1.0 + gamma * iteration as f64).powf(-power),
        }
    }
}

/// Contiguous samples of one input shape with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    shape: [usize; 3],
    data: Vec<f32>,
    labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(shape: [usize; 3], data: Vec<f32>, labels: Vec<usize>) -> Result<Self, NetError> {
        let per: usize = shape.iter().product();
        if per == 0 || data.len() != per * labels.len() {
            return Err(NetError::Contract(format!(
                "{} values for {} samples of shape {shape:?}",
                data.len(),
                labels.len()
            )));
        }
        Ok(Self { shape, data, labels })
    }

    /// MNIST-style images scaled to `[0, 1]`.
    pub fn from_idx(images: &IdxImages, labels: &[u8]) -> Result<Self, NetError> {
        let data = images.pixels.iter().map(|&p| f32::from(p) / 255.0).collect();
        Self::new(
            [1, images.rows, images.cols],
            data,
            labels.iter().map(|&l| usize::from(l)).collect(),
        )
    }

    /// Resize each raster to the input shape (see [`super::raster_to_input`]).
    pub fn from_rasters<'a>(
        shape: [usize; 3],
        items: impl IntoIterator<Item = (&'a Raster, usize)>,
    ) -> Self {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (r, label) in items {
            data.extend(super::raster_to_input(r, shape));
            labels.push(label);
        }
        Self { shape, data, labels }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let n = self.data.len() / self.labels.len().max(1);
        &self.data[i * n..(i + 1) * n]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let per: usize = self.shape.iter().product();
        Self {
            shape: self.shape,
            data: self.data[..n * per].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

/// Momentum buffers, one per parameter tensor in layer order.
#[derive(Debug, Clone)]
pub struct Sgd {
    velocity: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Sgd {
    pub fn new(spec: &NetworkSpec) -> Self {
        let velocity = spec
            .parametric_layers()
            .map(|(i, _)| {
                let (w, b) = spec.param_shapes(i).expect("parametric layer");
                (vec![0.0; w.iter().product()], vec![0.0; b.iter().product()])
            })
            .collect();
        Self { velocity }
    }

    /// `v = momentum * v + lr * (g + weight_decay * w); w -= v` for every
    /// parameter.
    pub fn step(
        &mut self,
        spec: &NetworkSpec,
        state: &mut NetworkState,
        grads: &Gradients,
        lr: f64,
        config: &SgdConfig,
    ) {
        let raw: Vec<(usize, Vec<f64>, Vec<f64>)> = spec
            .parametric_layers()
            .map(|(i, l)| {
                let g = &grads.params[&l.name];
                let w = g.weight.data().iter().map(|&v| f64::from(v)).collect();
                let b = g.bias.data().iter().map(|&v| f64::from(v)).collect();
                (i, w, b)
            })
            .collect();
        self.step_raw(spec, state, &raw, lr, config);
        state.iteration += 1;
    }

    fn step_raw(
        &mut self,
        spec: &NetworkSpec,
        state: &mut NetworkState,
        grads: &[(usize, Vec<f64>, Vec<f64>)],
        lr: f64,
        config: &SgdConfig,
    ) {
        let (mu, wd) = (config.momentum, config.weight_decay);
        for ((index, gw, gb), (vw, vb)) in grads.iter().zip(&mut self.velocity) {
            let params = state
                .get_mut(&spec.layer(*index).name)
                .expect("validated state");
            for (tensor, g, v) in [
                (&mut params.weight, gw, vw),
                (&mut params.bias, gb, vb),
            ] {
                for ((w, &g), v) in tensor.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                    *v = mu * *v + lr * (g + wd * f64::from(*w));
                    *w = (f64::from(*w) - *v) as f32;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: NetworkState,
    /// Batch-mean loss of every iteration.
    pub losses: Vec<f64>,
}

pub fn train_sgd(
    spec: &NetworkSpec,
    init: NetworkState,
    data: &LabeledSet,
    config: &SgdConfig,
    seed: u64,
) -> Result<TrainOutcome, NetError> {
    train_sgd_observed(spec, init, data, config, seed, &mut |_, _| {})
}

/// [`train_sgd`] calling `observer(iteration, loss)` after every step.
pub fn train_sgd_observed(
    spec: &NetworkSpec,
    init: NetworkState,
    data: &LabeledSet,
    config: &SgdConfig,
    seed: u64,
    observer: &mut dyn FnMut(u64, f64),
) -> Result<TrainOutcome, NetError> {
    let classes = spec
        .num_classes()
        .ok_or_else(|| NetError::Contract("training needs a network ending in softmax loss".into()))?;
    if data.shape != spec.input_shape() {
        return Err(NetError::Contract(format!(
            "samples have shape {:?}, network expects {:?}",
            data.shape,
            spec.input_shape()
        )));
    }
    if data.is_empty() || config.batch == 0 {
        return Err(NetError::Contract("empty dataset or zero batch size".into()));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(NetError::Contract(format!("label {bad} out of range for {classes} classes")));
    }
    init.validate(spec)?;

    let mut state = init;
    let mut sgd = Sgd::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let per = spec.input_len();
    let last = spec.layers().len() - 1;
    let mut batch_data = Vec::with_capacity(config.batch * per);
    let mut batch_labels = Vec::with_capacity(config.batch);
    let mut losses = Vec::with_capacity(config.iterations as usize);

    for _ in 0..config.iterations {
        batch_data.clear();
        batch_labels.clear();
        for _ in 0..config.batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            batch_data.extend_from_slice(data.sample(i));
            batch_labels.push(data.labels[i]);
        }
        let acts = forward_batch(spec, &state, &batch_data, config.batch, last);
        let grads = backward_raw(spec, &state, &acts, &batch_labels, false);
        if !grads.loss.is_finite() {
            return Err(NetError::Diverged {
                iteration: state.iteration,
            });
        }
        let lr = config.learning_rate(state.iteration);
        sgd.step_raw(spec, &mut state, &grads.params, lr, config);
        state.iteration += 1;
        losses.push(grads.loss);
        observer(state.iteration, grads.loss);
    }
    Ok(TrainOutcome { state, losses })
}

/// Arg-max class of the final layer for every sample (ties to the lowest
/// index). Batches run in parallel.
pub fn predict(spec: &NetworkSpec, state: &NetworkState, data: &LabeledSet) -> Vec<usize> {
    const CHUNK: usize = 256;
    let per = spec.input_len();
    let last = spec.layers().len() - 1;
    let k = spec.output_len(last);
    data.data
        .par_chunks(CHUNK * per)
        .flat_map_iter(|chunk| {
            let batch = chunk.len() / per;
            let acts = forward_batch(spec, state, chunk, batch, last);
            let out = acts.output(last).data().to_vec();
            (0..batch)
                .map(move |b| argmax(&out[b * k..(b + 1) * k]))
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn accuracy(spec: &NetworkSpec, state: &NetworkState, data: &LabeledSet) -> f64 {
    let predicted = predict(spec, state, data);
    let hits = predicted.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    hits as f64 / data.len().max(1) as f64
}

fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
