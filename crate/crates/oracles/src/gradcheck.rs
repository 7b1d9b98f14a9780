//! Engine gradients versus central differences of the reference network.

use crate::{relative_error, RefLayer, RefNet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchrec::net::{
    backward, forward, LayerKind, LayerSpec, NetworkSpec, NetworkState, Tensor,
};

pub fn ref_net(spec: &NetworkSpec) -> RefNet {
    let layers = spec
        .layers()
        .iter()
        .map(|l| match l.kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                stride,
                pad,
            } => RefLayer::Conv {
                out: out_channels,
                k: kernel,
                stride,
                pad,
            },
            LayerKind::MaxPool { window, stride } => RefLayer::Pool { window, stride },
            LayerKind::InnerProduct { out_units } => RefLayer::Ip { out: out_units },
            LayerKind::Relu => RefLayer::Relu,
            LayerKind::SoftmaxLoss => RefLayer::Softmax,
        })
        .collect();
    RefNet {
        input: spec.input_shape(),
        layers,
    }
}

pub fn ref_params(spec: &NetworkSpec, state: &NetworkState) -> Vec<(Vec<f64>, Vec<f64>)> {
    let widen = |t: &Tensor| t.data().iter().map(|&v| f64::from(v)).collect();
    spec.parametric_layers()
        .map(|(_, l)| {
            let p = state.get(&l.name).expect("state matches spec");
            (widen(&p.weight), widen(&p.bias))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst: String,
}

/// A probe moved a ReLU across zero or changed a pooling winner, so the loss
/// is not differentiable along it.
#[derive(Debug, Clone)]
pub struct KinkCrossed(pub String);

/// Check every parameter gradient and every input gradient of a batch.
pub fn check(
    spec: &NetworkSpec,
    state: &NetworkState,
    inputs: &[Vec<f32>],
    labels: &[usize],
    eps: f64,
    floor: f64,
) -> Result<GradReport, KinkCrossed> {
    let mut shape = vec![inputs.len()];
    shape.extend(spec.input_shape());
    let batch = Tensor::new(shape, inputs.concat()).expect("input shape");
    let acts = forward(spec, state, &batch, None).expect("forward");
    let grads = backward(spec, state, &acts, labels).expect("backward");

    let net = ref_net(spec);
    let base_params = ref_params(spec, state);
    let base_inputs: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| x.iter().map(|&v| f64::from(v)).collect())
        .collect();
    let base = net.loss(&base_params, &base_inputs, labels);

    let mut report = GradReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: String::new(),
    };
    let mut record = |what: String, analytic: f64, numeric: f64| {
        let e = relative_error(analytic, numeric, floor);
        report.checked += 1;
        if e >= report.max_relative_error {
            report.max_relative_error = e;
            report.worst = format!("{what}: analytic {analytic:e}, numeric {numeric:e}");
        }
    };
    let probe = |params: &[(Vec<f64>, Vec<f64>)], xs: &[Vec<f64>], what: &str| {
        let t = net.loss(params, xs, labels);
        if t.pattern != base.pattern {
            return Err(KinkCrossed(what.to_string()));
        }
        Ok(t.loss)
    };

    let names: Vec<&LayerSpec> = spec.parametric_layers().map(|(_, l)| l).collect();
    for (li, layer) in names.iter().enumerate() {
        let g = &grads.params[&layer.name];
        for (part, analytic) in [(0usize, g.weight.data()), (1, g.bias.data())] {
            for (i, &a) in analytic.iter().enumerate() {
                let what = format!("{}.{}[{i}]", layer.name, ["weight", "bias"][part]);
                let shifted = |d: f64| {
                    let mut p = base_params.clone();
                    let v = if part == 0 { &mut p[li].0[i] } else { &mut p[li].1[i] };
                    *v += d;
                    probe(&p, &base_inputs, &what)
                };
                let numeric = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
                record(what, f64::from(a), numeric);
            }
        }
    }
    let per = spec.input_len();
    for (i, &a) in grads.input.data().iter().enumerate() {
        let (b, j) = (i / per, i % per);
        let what = format!("input[{b}][{j}]");
        let shifted = |d: f64| {
            let mut xs = base_inputs.clone();
            xs[b][j] += d;
            probe(&base_params, &xs, &what)
        };
        let numeric = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
        record(what, f64::from(a), numeric);
    }
    Ok(report)
}

/// A random conv + pool + inner-product + softmax network with at most 1000
/// parameters, random weights and a random labelled batch.
pub struct SmallCase {
    pub spec: NetworkSpec,
    pub state: NetworkState,
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

pub fn small_case(seed: u64) -> SmallCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let c = rng.gen_range(1..=2);
        let hw = rng.gen_range(6..=9);
        let k = rng.gen_range(2..=3);
        let out = rng.gen_range(2..=4);
        let pad = rng.gen_range(0..=1);
        let hidden = rng.gen_range(3..=8);
        let classes = rng.gen_range(2..=4);
        let layers = vec![
            LayerSpec::new(
                "conv",
                LayerKind::Conv {
                    out_channels: out,
                    kernel: k,
                    stride: 1,
                    pad,
                },
            ),
            LayerSpec::new("pool", LayerKind::MaxPool { window: 2, stride: 2 }),
            LayerSpec::new("ip1", LayerKind::InnerProduct { out_units: hidden }),
            LayerSpec::new("relu", LayerKind::Relu),
            LayerSpec::new("ip2", LayerKind::InnerProduct { out_units: classes }),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
        ];
        let Ok(spec) = NetworkSpec::new([c, hw, hw], layers) else {
            continue;
        };
        if spec.num_params() > 1000 {
            continue;
        }
        let state = NetworkState::init(&spec, rng.gen());
        let batch = rng.gen_range(1..=3);
        let inputs = (0..batch)
            .map(|_| (0..spec.input_len()).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
            .collect();
        let labels = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
        return SmallCase {
            spec,
            state,
            inputs,
            labels,
        };
    }
}
