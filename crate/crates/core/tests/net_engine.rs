use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchrec::net::*;
use sketchrec::Raster;
use sketchrec_oracles as oracle;
use sketchrec_oracles::gradcheck;

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn widen(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| f64::from(v)).collect()
}

fn batch_of(spec: &NetworkSpec, samples: &[Vec<f32>]) -> Tensor {
    let mut shape = vec![samples.len()];
    shape.extend(spec.input_shape());
    Tensor::new(shape, samples.concat()).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    let mut passed = 0;
    let mut seed = 0;
    while passed < 6 {
        let case = gradcheck::small_case(seed);
        seed += 1;
        let Ok(report) = gradcheck::check(&case.spec, &case.state, &case.inputs, &case.labels, 1e-3, 1e-3)
        else {
            continue;
        };
        assert!(
            report.max_relative_error <= 1e-4,
            "seed {}: {}",
            seed - 1,
            report.worst
        );
        assert!(case.spec.num_params() <= 1000);
        passed += 1;
    }
}

#[test]
fn logit_gradient_is_probabilities_minus_one_hot() {
    let spec = NetworkSpec::new([5, 1, 1], vec![LayerSpec::new("loss", LayerKind::SoftmaxLoss)]).unwrap();
    let state = NetworkState::zeros(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&[2, 5, 1, 1], &mut rng);
    let labels = [3, 0];
    let acts = forward(&spec, &state, &x, None).unwrap();
    let g = backward(&spec, &state, &acts, &labels).unwrap();
    for (b, &label) in labels.iter().enumerate() {
        let p = oracle::softmax(&widen(&x)[b * 5..(b + 1) * 5]);
        for k in 0..5 {
            let expected = (p[k] - f64::from(u8::from(k == label))) / 2.0;
            let got = f64::from(g.input.data()[b * 5 + k]);
            assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
        }
    }
}

#[test]
fn confident_correct_prediction_has_vanishing_gradients() {
    let spec = NetworkSpec::new(
        [2, 1, 1],
        vec![
            LayerSpec::new("ip", LayerKind::InnerProduct { out_units: 2 }),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
        ],
    )
    .unwrap();
    let mut state = NetworkState::zeros(&spec);
    state.get_mut("ip").unwrap().weight = Tensor::new(vec![2, 2], vec![100.0, 0.0, 0.0, -100.0]).unwrap();
    let x = Tensor::new(vec![2, 1, 1], vec![1.0, 1.0]).unwrap();
    let acts = forward(&spec, &state, &x, None).unwrap();
    let g = backward(&spec, &state, &acts, &[0]).unwrap();
    assert!(g.loss < 1e-30);
    let p = &g.params["ip"];
    assert!(p.weight.data().iter().chain(p.bias.data()).all(|v| v.abs() < 1e-30));
}

#[test]
fn backward_requires_full_forward() {
    let spec = preset_lenet_modified(10).unwrap();
    let state = NetworkState::init(&spec, 0);
    let acts = forward(&spec, &state, &Tensor::zeros(&[1, 28, 28]), Some("ip1")).unwrap();
    assert!(matches!(backward(&spec, &state, &acts, &[0]), Err(NetError::Contract(_))));
}

#[test]
fn conv_pool_and_ip_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let c = rng.gen_range(1..=3);
        let (h, w) = (rng.gen_range(5..=12), rng.gen_range(5..=12));
        let k = rng.gen_range(1..=5);
        let stride = rng.gen_range(1..=2);
        let pad = rng.gen_range(0..=2);
        let o = rng.gen_range(1..=5);
        let x = random_tensor(&[c, h, w], &mut rng);
        let wt = random_tensor(&[o, c, k, k], &mut rng);
        let b = random_tensor(&[o], &mut rng);
        let y = conv2d_forward(&x, &wt, &b, stride, pad).unwrap();
        let (expected, shape) = oracle::conv2d(&widen(&x), [c, h, w], &widen(&wt), &widen(&b), k, stride, pad);
        assert_eq!(y.shape(), &shape);
        for (a, e) in y.data().iter().zip(&expected) {
            assert!((f64::from(*a) - e).abs() <= 1e-5);
        }

        let window = rng.gen_range(1..=3.min(h).min(w));
        let (p, arg) = maxpool_forward(&x, window, stride).unwrap();
        let (pe, arge, pshape) = oracle::maxpool(&widen(&x), [c, h, w], window, stride);
        assert_eq!(p.shape(), &pshape);
        assert_eq!(widen(&p), pe);
        assert_eq!(arg.iter().map(|&a| a as usize).collect::<Vec<_>>(), arge);

        let d = rng.gen_range(1..=40);
        let u = rng.gen_range(1..=20);
        let xi = random_tensor(&[d], &mut rng);
        let wi = random_tensor(&[u, d], &mut rng);
        let bi = random_tensor(&[u], &mut rng);
        let yi = inner_product_forward(&xi, &wi, &bi).unwrap();
        for (a, e) in yi.data().iter().zip(oracle::inner_product(&widen(&xi), &widen(&wi), &widen(&bi))) {
            assert!((f64::from(*a) - e).abs() <= 1e-5);
        }
    }
}

#[test]
fn large_inner_product_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_tensor(&[800], &mut rng);
    let w = random_tensor(&[500, 800], &mut rng);
    let b = random_tensor(&[500], &mut rng);
    let y = inner_product_forward(&x, &w, &b).unwrap();
    for (a, e) in y.data().iter().zip(oracle::inner_product(&widen(&x), &widen(&w), &widen(&b))) {
        assert!((f64::from(*a) - e).abs() <= 1e-5);
    }
}

#[test]
fn softmax_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let k = rng.gen_range(2..=20);
        let logits: Vec<f32> = (0..k).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let wide: Vec<f64> = logits.iter().map(|&v| f64::from(v)).collect();
        let label = rng.gen_range(0..k);
        let expected = oracle::softmax(&wide);
        for (a, e) in softmax(&logits).iter().zip(&expected) {
            assert!((a - e).abs() <= 1e-9);
        }
        let (loss, p) = softmax_loss(&Tensor::new(vec![k], logits).unwrap(), label).unwrap();
        assert!(loss >= 0.0);
        assert!((loss - oracle::softmax_loss(&wide, label)).abs() <= 1e-9);
        assert!(p.data().iter().all(|&v| v >= 0.0));
        let sum: f64 = p.data().iter().map(|&v| f64::from(v)).sum();
        assert!((sum - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn preset_feature_widths() {
    let lenet = preset_lenet_modified(10).unwrap();
    let state = NetworkState::init(&lenet, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let acts = forward(&lenet, &state, &random_tensor(&[1, 28, 28], &mut rng), Some("ip1")).unwrap();
    assert_eq!(acts.get("ip1").unwrap().len(), 500);
    assert!(acts.get("ip2").is_none());

    let alex = preset_imagenet_shape(1000).unwrap();
    let state = NetworkState::init(&alex, 1);
    let acts = forward(&alex, &state, &random_tensor(&[3, 227, 227], &mut rng), Some("fc7")).unwrap();
    assert_eq!(acts.get("fc7").unwrap().shape(), &[1, 4096]);
}

#[test]
fn unknown_tap_lists_layers() {
    let spec = preset_lenet_modified(10).unwrap();
    let state = NetworkState::init(&spec, 1);
    let err = forward(&spec, &state, &Tensor::zeros(&[1, 28, 28]), Some("fc7")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("fc7") && msg.contains("ip1") && msg.contains("conv2"), "{msg}");
}

#[test]
fn tap_equals_prefix_network_and_batching() {
    let spec = preset_lenet_modified(10).unwrap();
    let state = NetworkState::init(&spec, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Vec<f32>> = (0..9).map(|_| random_tensor(&[1, 28, 28], &mut rng).into_data()).collect();
    let full = forward(&spec, &state, &batch_of(&spec, &samples), None).unwrap();

    let cut = spec.index_of("ip1").unwrap();
    let prefix = NetworkSpec::new([1, 28, 28], spec.layers()[..=cut].to_vec()).unwrap();
    let mut prefix_state = std::collections::BTreeMap::new();
    for (_, l) in prefix.parametric_layers() {
        prefix_state.insert(l.name.clone(), state.get(&l.name).unwrap().clone());
    }
    let prefix_state = NetworkState::from_params(&prefix, prefix_state).unwrap();
    let truncated = forward(&prefix, &prefix_state, &batch_of(&spec, &samples), None).unwrap();
    assert_eq!(truncated.get("ip1"), full.get("ip1"));

    for (i, s) in samples.iter().enumerate() {
        let single = forward(&spec, &state, &Tensor::new(vec![1, 28, 28], s.clone()).unwrap(), None).unwrap();
        for (name, t) in single.iter() {
            assert_eq!(t.outer(0), full.sample(name, i).unwrap(), "layer {name}");
        }
        let raster = Raster::new(28, 28, s.clone()).unwrap();
        let f = tap_features(&spec, &state, &raster, "ip1", "lenet", "x").unwrap();
        assert_eq!(f.values.as_slice(), full.sample("ip1", i).unwrap());
    }
}

#[test]
fn zero_input_and_biases_give_zero_features() {
    let spec = preset_lenet_modified(10).unwrap();
    let state = NetworkState::init(&spec, 3);
    let f = tap_features(&spec, &state, &Raster::zeros(64, 64), "ip1", "n", "s").unwrap();
    assert_eq!(f.values.len(), 500);
    assert!(f.values.iter().all(|&v| v == 0.0));
}

#[test]
fn weight_file_round_trip_and_errors() {
    let spec = preset_lenet_modified(10).unwrap();
    let state = NetworkState::init(&spec, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lenet.sknw");
    save_state(&spec, &state, &path).unwrap();
    let loaded = load_state(&spec, &path).unwrap();
    for (name, p) in state.iter() {
        let q = loaded.get(name).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p.weight), bits(&q.weight));
        assert_eq!(bits(&p.bias), bits(&q.bias));
    }

    let bytes = encode_state(&spec, &state).unwrap();
    for cut in [0, 3, 12, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(decode_state(&spec, &bytes[..cut]), Err(NetError::Format(_))));
    }

    let other = preset_lenet_modified(7).unwrap();
    match decode_state(&other, &bytes) {
        Err(NetError::LayerMismatch { layer, .. }) => assert_eq!(layer, "ip2"),
        other => panic!("expected mismatch, got {other:?}"),
    }
}

#[test]
fn sgd_step_matches_closed_form() {
    let spec = NetworkSpec::new(
        [1, 1, 1],
        vec![
            LayerSpec::new("ip", LayerKind::InnerProduct { out_units: 2 }),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
        ],
    )
    .unwrap();
    let mut state = NetworkState::zeros(&spec);
    state.get_mut("ip").unwrap().weight = Tensor::new(vec![2, 1], vec![0.5, -0.25]).unwrap();
    let before = state.clone();
    let x = Tensor::new(vec![1, 1, 1], vec![2.0]).unwrap();
    let acts = forward(&spec, &state, &x, None).unwrap();
    let g = backward(&spec, &state, &acts, &[1]).unwrap();
    let config = SgdConfig {
        momentum: 0.9,
        weight_decay: 0.01,
        ..SgdConfig::default()
    };
    let mut sgd = Sgd::new(&spec);
    sgd.step(&spec, &mut state, &g, 0.1, &config);

    // logits [1.0, -0.5]; d loss / d w_k = (p_k - y_k) * x
    let p0 = 1.0 / (1.0 + (-1.5f64).exp());
    let grads = [p0 * 2.0, (1.0 - p0 - 1.0) * 2.0];
    for (k, gk) in grads.iter().enumerate() {
        let w = f64::from(before.get("ip").unwrap().weight.data()[k]);
        let expected = w - 0.1 * (gk + 0.01 * w);
        let got = f64::from(state.get("ip").unwrap().weight.data()[k]);
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }
    assert_eq!(state.iteration, 1);
}

fn tiny_classifier() -> NetworkSpec {
    NetworkSpec::new(
        [1, 6, 6],
        vec![
            LayerSpec::new(
                "conv",
                LayerKind::Conv {
                    out_channels: 3,
                    kernel: 3,
                    stride: 1,
                    pad: 0,
                },
            ),
            LayerSpec::new("pool", LayerKind::MaxPool { window: 2, stride: 2 }),
            LayerSpec::new("ip", LayerKind::InnerProduct { out_units: 3 }),
            LayerSpec::new("loss", LayerKind::SoftmaxLoss),
        ],
    )
    .unwrap()
}

#[test]
fn memorizes_a_single_example() {
    let spec = tiny_classifier();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = LabeledSet::new([1, 6, 6], (0..36).map(|_| rng.gen_range(0.0..1.0)).collect(), vec![2]).unwrap();
    let config = SgdConfig {
        lr: 0.1,
        batch: 1,
        iterations: 100,
        ..SgdConfig::default()
    };
    let out = train_sgd(&spec, NetworkState::init(&spec, 5), &data, &config, 5).unwrap();
    assert_eq!(out.losses.len(), 100);
    assert!(*out.losses.last().unwrap() < 0.01, "{:?}", out.losses.last());
}

#[test]
fn training_is_deterministic_and_reports_divergence() {
    let spec = tiny_classifier();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 20;
    let data = LabeledSet::new(
        [1, 6, 6],
        (0..36 * n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        (0..n).map(|i| i % 3).collect(),
    )
    .unwrap();
    let config = SgdConfig {
        batch: 4,
        iterations: 30,
        ..SgdConfig::default()
    };
    let a = train_sgd(&spec, NetworkState::init(&spec, 6), &data, &config, 9).unwrap();
    let b = train_sgd(&spec, NetworkState::init(&spec, 6), &data, &config, 9).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.losses, b.losses);

    let wild = SgdConfig {
        lr: 1e30,
        lr_policy: LrPolicy::Fixed,
        ..config
    };
    match train_sgd(&spec, NetworkState::init(&spec, 6), &data, &wild, 9) {
        Err(NetError::Diverged { iteration }) => assert!(iteration < 30),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.losses)),
    }
}

#[test]
fn inverse_decay_schedule() {
    let c = SgdConfig::default();
    assert_eq!(c.learning_rate(0), 0.01);
    assert!((c.learning_rate(10_000) - 0.01 * 2f64.powf(-0.75)).abs() < 1e-15);
}

fn conv_spec(c: usize, h: usize, w: usize, k: usize, pad: usize) -> NetworkSpec {
    NetworkSpec::new(
        [c, h, w],
        vec![LayerSpec::new(
            "conv",
            LayerKind::Conv {
                out_channels: 2,
                kernel: k,
                stride: 1,
                pad,
            },
        )],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_is_linear(seed in any::<u64>(), a in -2.0f32..2.0, b in -2.0f32..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = conv_spec(2, 7, 7, 3, 1);
        let mut state = NetworkState::init(&spec, seed);
        state.get_mut("conv").unwrap().bias = Tensor::zeros(&[2]);
        let x = random_tensor(&[2, 7, 7], &mut rng);
        let y = random_tensor(&[2, 7, 7], &mut rng);
        let mix = Tensor::new(
            vec![2, 7, 7],
            x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
        ).unwrap();
        let run = |t: &Tensor| forward(&spec, &state, t, None).unwrap().get("conv").unwrap().clone();
        let (fx, fy, fm) = (run(&x), run(&y), run(&mix));
        for i in 0..fm.len() {
            let expected = f64::from(a) * f64::from(fx.data()[i]) + f64::from(b) * f64::from(fy.data()[i]);
            prop_assert!((f64::from(fm.data()[i]) - expected).abs() <= 1e-5);
        }
    }

    #[test]
    fn convolution_commutes_with_translation(seed in any::<u64>(), dy in 0usize..3, dx in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, k, pad) = (10, 10, 3, 1);
        let spec = conv_spec(1, h, w, k, pad);
        let state = NetworkState::init(&spec, seed);
        let x = random_tensor(&[1, h, w], &mut rng);
        let shifted = Tensor::from_fn(&[1, h, w], |i| {
            let (r, c) = (i / w, i % w);
            if r >= dy && c >= dx { x.data()[(r - dy) * w + c - dx] } else { 0.0 }
        });
        let fx = forward(&spec, &state, &x, None).unwrap().get("conv").unwrap().clone();
        let fs = forward(&spec, &state, &shifted, None).unwrap().get("conv").unwrap().clone();
        // output (r, c) reads rows r-1..=r+1; interior avoids padding and the
        // zero band introduced by the shift
        for o in 0..2 {
            for r in (dy + 1)..(h - 1) {
                for c in (dx + 1)..(w - 1) {
                    if r - dy < 1 || c - dx < 1 { continue; }
                    prop_assert_eq!(
                        fs.data()[(o * h + r) * w + c],
                        fx.data()[(o * h + r - dy) * w + c - dx]
                    );
                }
            }
        }
    }
}
