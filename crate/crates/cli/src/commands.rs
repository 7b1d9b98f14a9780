use crate::{AugmentArgs, EvaluateArgs, ExtractArgs, HeatmapArgs, TrainCnnArgs, TrainSvmArgs};
use rayon::prelude::*;
use serde_json::{json, Value};
use sketchrec::augment::{dilate, dilate_sketch, expand, resolve_plan, AugmentationPlan};
use sketchrec::derive_seed;
use sketchrec::eval::{run_experiment, write_report, ExperimentConfig, FeatureBank, Record, SketchRef};
use sketchrec::fsutil::write_atomic;
use sketchrec::heatmap::{compute_heatmap, render, RenderMode};
use sketchrec::net::{
    accuracy, load_network, preset, raster_to_input, save_state, train_sgd_observed, FeatureTap, LabeledSet,
    LayerKind, NetworkSpec, NetworkState, SgdConfig, IMAGENET_SHAPE, LENET_MODIFIED,
};
use sketchrec::sketch_io::idx::parse_pair;
use sketchrec::sketch_io::{
    decode_pgm, encode_sketch_pgm, load_corpus, preprocess, Corpus, DEFAULT_WORKING_RESOLUTION,
};
use sketchrec::svm::{self, load_features, save_features, save_model, train_ovr, FeatureSet, SvmConfig};
use std::error::Error;
use std::path::Path;
use std::time::Instant;

type Result<T = ()> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

fn log_config(command: &str, config: Value) {
    eprintln!("sketchrec {command}: {config}");
}

fn load_plan(name: Option<&str>) -> Result<Option<AugmentationPlan>> {
    Ok(name.map(resolve_plan).transpose()?)
}

fn ensure_parent(path: &Path) -> Result {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn augment(args: AugmentArgs, threads: usize) -> Result {
    let plan = resolve_plan(&args.plan)?;
    log_config(
        "augment",
        json!({
            "input": args.input, "output": args.output, "plan": plan.name(), "plan_size": plan.len(),
            "working_resolution": DEFAULT_WORKING_RESOLUTION, "seed": args.seed, "threads": threads,
        }),
    );
    let corpus = load_corpus(&args.input, DEFAULT_WORKING_RESOLUTION)?;
    for category in corpus.categories() {
        std::fs::create_dir_all(args.output.join(category))?;
    }
    let written: usize = corpus
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|sketch| -> Result<usize> {
            let variants = expand(&dilate_sketch(sketch)?, &plan)?;
            let stem = sketch.id.rsplit('/').next().unwrap_or(&sketch.id);
            for (i, v) in variants.iter().enumerate() {
                let path = args.output.join(&v.category).join(format!("{stem}-t{i:02}.pgm"));
                write_atomic(&path, &encode_sketch_pgm(&v.raster))?;
            }
            Ok(variants.len())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    eprintln!("sketchrec augment: {} originals -> {written} variants", corpus.len());
    Ok(())
}

/// Dilated rasters (and plan variants) of a corpus as network inputs.
fn corpus_samples(corpus: &Corpus, shape: [usize; 3], plan: Option<&AugmentationPlan>) -> Result<LabeledSet> {
    let rows: Vec<(Vec<f32>, usize)> = corpus
        .per_category()
        .enumerate()
        .flat_map(|(label, (_, list))| list.iter().map(move |s| (s, label)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(sketch, label)| {
            let dilated = dilate_sketch(sketch)?;
            let mut out = vec![(raster_to_input(&dilated.raster, shape), label)];
            if let Some(plan) = plan {
                for v in expand(&dilated, plan)? {
                    out.push((raster_to_input(&v.raster, shape), label));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let labels = rows.iter().map(|r| r.1).collect();
    let data = rows.into_iter().flat_map(|r| r.0).collect();
    Ok(LabeledSet::new(shape, data, labels)?)
}

fn read_idx(dir: &Path, prefix: &str) -> Result<Option<LabeledSet>> {
    let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    if !images.is_file() {
        return Ok(None);
    }
    let (images, labels) = parse_pair(&std::fs::read(&images)?, &std::fs::read(&labels)?)?;
    Ok(Some(LabeledSet::from_idx(&images, &labels)?))
}

fn network_for(net: &str, classes: usize) -> Result<NetworkSpec> {
    if net == LENET_MODIFIED || net == IMAGENET_SHAPE {
        return Ok(preset(net, classes)?);
    }
    let spec = NetworkSpec::from_json(&std::fs::read_to_string(net)?)?;
    match spec.num_classes() {
        Some(k) if k == classes => Ok(spec),
        other => Err(format!("descriptor `{net}` has {other:?} outputs, data has {classes} classes").into()),
    }
}

pub fn train_cnn(args: TrainCnnArgs, threads: usize) -> Result {
    let config = SgdConfig {
        lr: args.lr,
        momentum: args.momentum,
        batch: args.batch,
        iterations: args.iters,
        ..SgdConfig::default()
    };
    let plan = load_plan(args.plan.as_deref())?;
    let (train, test, classes) = match read_idx(&args.input, "train")? {
        Some(train) => (train, read_idx(&args.input, "t10k")?, (0..10).map(|d| d.to_string()).collect()),
        None => {
            let corpus = load_corpus(&args.input, DEFAULT_WORKING_RESOLUTION)?;
            let spec = network_for(&args.net.net, corpus.categories().len())?;
            let set = corpus_samples(&corpus, spec.input_shape(), plan.as_ref())?;
            (set, None, corpus.categories().to_vec())
        }
    };
    let spec = network_for(&args.net.net, classes.len())?;
    log_config(
        "train-cnn",
        json!({
            "input": args.input, "output": args.output, "net": args.net.net, "classes": classes,
            "samples": train.len(), "plan": plan.as_ref().map(AugmentationPlan::name), "sgd": config,
            "seed": args.seed, "threads": threads,
        }),
    );
    let init = NetworkState::init(&spec, derive_seed(args.seed, 0));
    let clock = Instant::now();
    let mut window = 0.0;
    let outcome = train_sgd_observed(&spec, init, &train, &config, derive_seed(args.seed, 1), &mut |it, loss| {
        window += loss;
        if it % 500 == 0 {
            eprintln!("sketchrec train-cnn: iteration {it}: mean loss {:.5}", window / 500.0);
            window = 0.0;
        }
    })?;
    ensure_parent(&args.output)?;
    save_state(&spec, &outcome.state, &args.output)?;
    eprintln!(
        "sketchrec train-cnn: {} iterations in {:.1} s, train accuracy {:.4}",
        args.iters,
        clock.elapsed().as_secs_f64(),
        accuracy(&spec, &outcome.state, &train)
    );
    if let Some(test) = test {
        eprintln!("sketchrec train-cnn: test accuracy {:.4}", accuracy(&spec, &outcome.state, &test));
    }
    Ok(())
}

pub fn extract(args: ExtractArgs, threads: usize) -> Result {
    let plan = load_plan(args.plan.as_deref())?;
    let (spec, state) = load_network(&args.net.net, &args.weights)?;
    let tap = FeatureTap::new(&spec, &state, &args.layer)?;
    log_config(
        "extract",
        json!({
            "input": args.input, "output": args.output, "net": args.net.net, "weights": args.weights,
            "layer": args.layer, "dim": tap.dim(), "plan": plan.as_ref().map(AugmentationPlan::name),
            "threads": threads,
        }),
    );
    let corpus = load_corpus(&args.input, DEFAULT_WORKING_RESOLUTION)?;
    let bank = FeatureBank::compute(&corpus, &tap, plan.as_ref())?;
    let plan_size = plan.as_ref().map_or(0, AugmentationPlan::len);
    let mut set = FeatureSet::new(tap.dim(), corpus.categories().to_vec());
    set.network_id = args.net.net.clone();
    set.layer = args.layer.clone();
    for (category, (_, list)) in corpus.per_category().enumerate() {
        for (index, sketch) in list.iter().enumerate() {
            let r = SketchRef { category, index };
            set.push(sketch.id.clone(), category, bank.get(Record::Dilated(r)))?;
            for v in 0..plan_size {
                let id = sketchrec::augment::variant_id(&sketch.id, v);
                set.push(id, category, bank.get(Record::Variant(r, v)))?;
            }
        }
    }
    ensure_parent(&args.output)?;
    save_features(&set, &args.output)?;
    eprintln!("sketchrec extract: {} vectors of dim {}", set.len(), set.dim());
    Ok(())
}

pub fn train_svm(args: TrainSvmArgs, threads: usize) -> Result {
    let config = SvmConfig {
        c: args.c,
        tol: args.tol,
        seed: args.seed,
        ..SvmConfig::default()
    };
    log_config(
        "train-svm",
        json!({"input": args.input, "output": args.output, "svm": config, "seed": args.seed, "threads": threads}),
    );
    let set = load_features(&args.input)?;
    let model = train_ovr(&set, &config)?;
    ensure_parent(&args.output)?;
    save_model(&model, &args.output)?;
    let unconverged = model.meta().converged.iter().filter(|c| !**c).count();
    eprintln!(
        "sketchrec train-svm: {} classes, training accuracy {:.4}, {unconverged} classes hit the sweep limit",
        model.classes().len(),
        svm::accuracy(&model, &set)?
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs, threads: usize) -> Result {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.input {
        config.corpus_root = v;
    }
    if let Some(v) = args.plan {
        config.plan = v;
    }
    if let Some(v) = args.net {
        config.network = v;
    }
    if let Some(v) = args.weights {
        config.weights = v;
    }
    if let Some(v) = args.layer {
        config.layer = v;
    }
    if let Some(v) = args.c {
        config.svm.c = v;
    }
    if let Some(v) = args.tol {
        config.svm.tol = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    log_config(
        "evaluate",
        json!({"config": config, "report": args.report, "seed": config.seed, "threads": threads}),
    );
    let (report, timings) = run_experiment(&config)?;
    write_report(&report, &timings, &args.report)?;
    for m in &report.means {
        eprintln!("sketchrec evaluate: t={:<3} mean precision {:.4}", m.ladder, m.mean_precision);
    }
    Ok(())
}

pub fn heatmap(args: HeatmapArgs, threads: usize) -> Result {
    let (spec, state) = load_network(&args.net.net, &args.weights)?;
    let layer = match args.layer {
        Some(l) => l,
        None => spec
            .layers()
            .iter()
            .rev()
            .find(|l| matches!(l.kind, LayerKind::Conv { .. }))
            .map(|l| l.name.clone())
            .ok_or("network has no convolution layer")?,
    };
    let mode: RenderMode = args.mode.parse()?;
    log_config(
        "heatmap",
        json!({
            "input": args.input, "output": args.output, "net": args.net.net, "weights": args.weights,
            "layer": layer, "mode": args.mode, "threads": threads,
        }),
    );
    let raster = decode_pgm(&std::fs::read(&args.input)?)
        .map_err(|e| format!("{}: {e}", args.input.display()))?;
    let sketch = dilate(&preprocess(&raster, DEFAULT_WORKING_RESOLUTION))?;
    let map = compute_heatmap(&spec, &state, &sketch, &layer)?;
    ensure_parent(&args.output)?;
    write_atomic(&args.output, &render(&map, mode))?;
    eprintln!(
        "sketchrec heatmap: {} grid {}x{} -> {}x{}",
        layer, map.grid_shape.0, map.grid_shape.1, map.shape.0, map.shape.1
    );
    Ok(())
}
