use super::report::{EvaluationReport, RunResult, StageTimings};
use super::split::{make_splits, test_records, training_records, Record};
use super::{compute_precision, EvalError, ExperimentConfig, NO_PLAN};
use crate::augment::{dilate_sketch, expand, resolve_plan, variant_id, AugmentationPlan};
use crate::derive_seed;
use crate::net::{load_network, FeatureTap};
use crate::sketch_io::{load_corpus, select_subset, Corpus};
use crate::svm::{train_ovr, FeatureSet, SvmConfig};
use rayon::prelude::*;
use std::time::Instant;

const SUBSET_STREAM: u64 = u64::MAX;

/// Seed of shuffle `index` under `master`.
pub fn shuffle_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Features of every dilated original and of each of its plan variants,
/// computed once and shared by all shuffles and ladder points.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    offsets: Vec<usize>,
    dilated: Vec<Vec<f32>>,
    variants: Vec<Vec<Vec<f32>>>,
    dim: usize,
}

impl FeatureBank {
    pub fn compute(corpus: &Corpus, tap: &FeatureTap, plan: Option<&AugmentationPlan>) -> Result<Self, EvalError> {
        let mut offsets = Vec::with_capacity(corpus.categories().len());
        let mut total = 0;
        for n in corpus.counts() {
            offsets.push(total);
            total += n;
        }
        let originals: Vec<_> = corpus.iter().collect();
        let rows: Vec<(Vec<f32>, Vec<Vec<f32>>)> = originals
            .par_iter()
            .map(|sketch| {
                let dilated = dilate_sketch(sketch)?;
                let variants = match plan {
                    Some(p) => expand(&dilated, p)?,
                    None => Vec::new(),
                };
                let mut rasters = vec![&dilated.raster];
                rasters.extend(variants.iter().map(|v| &v.raster));
                let mut features = tap.extract(&rasters);
                let rest = features.split_off(1);
                Ok((features.pop().expect("dilated features"), rest))
            })
            .collect::<Result<_, EvalError>>()?;
        let (dilated, variants) = rows.into_iter().unzip();
        Ok(Self {
            offsets,
            dilated,
            variants,
            dim: tap.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, record: Record) -> &[f32] {
        let r = record.original();
        let flat = self.offsets[r.category] + r.index;
        match record {
            Record::Dilated(_) => &self.dilated[flat],
            Record::Variant(_, v) => &self.variants[flat][v],
        }
    }
}

fn feature_set(corpus: &Corpus, bank: &FeatureBank, records: &[Record]) -> Result<FeatureSet, EvalError> {
    let mut set = FeatureSet::new(bank.dim(), corpus.categories().to_vec());
    for &record in records {
        let r = record.original();
        let id = &corpus.category(r.category)[r.index].id;
        let id = match record {
            Record::Dilated(_) => id.clone(),
            Record::Variant(_, v) => variant_id(id, v),
        };
        set.push(id, r.category, bank.get(record))?;
    }
    Ok(set)
}

/// Run the ladder on an already selected corpus with a loaded network.
/// Every category must hold exactly `config.per_category` sketches.
pub fn run_on(
    corpus: &Corpus,
    tap: &FeatureTap,
    plan: Option<&AugmentationPlan>,
    config: &ExperimentConfig,
) -> Result<(EvaluationReport, StageTimings), EvalError> {
    config.validate()?;
    if let Some((name, list)) = corpus.per_category().find(|(_, l)| l.len() != config.per_category) {
        return Err(EvalError::Contract(format!(
            "category `{name}` has {} sketches, experiment expects {}",
            list.len(),
            config.per_category
        )));
    }
    let mut timings = StageTimings::default();
    let clock = Instant::now();
    let bank = FeatureBank::compute(corpus, tap, plan)?;
    timings.record("features", clock.elapsed().as_secs_f64());

    let plan_size = plan.map_or(0, AugmentationPlan::len);
    let include = config.trains_on_originals();
    let mut runs = Vec::with_capacity(config.shuffles * config.ladder.len());
    let clock = Instant::now();
    for shuffle in 0..config.shuffles {
        let seed = shuffle_seed(config.seed, shuffle);
        for &t in &config.ladder {
            let split = make_splits(corpus, t, seed)?;
            let train = feature_set(corpus, &bank, &training_records(&split, plan_size, include))?;
            let test = feature_set(corpus, &bank, &test_records(&split))?;
            let svm = SvmConfig {
                seed: derive_seed(seed, t as u64),
                ..config.svm.clone()
            };
            let model = train_ovr(&train, &svm)?;
            let predicted = (0..test.len())
                .map(|i| model.predict(test.vector(i)))
                .collect::<Result<Vec<_>, _>>()?;
            let truth: Vec<&str> = test.labels().iter().map(|&l| test.classes()[l as usize].as_str()).collect();
            runs.push(RunResult {
                ladder: t,
                shuffle,
                precision: compute_precision(&predicted, &truth)?,
                train_count: train.len(),
                test_count: test.len(),
            });
        }
    }
    timings.record("svm", clock.elapsed().as_secs_f64());
    let report = EvaluationReport::new(config.clone(), corpus.categories().to_vec(), plan_size, bank.dim(), runs);
    Ok((report, timings))
}

/// Load everything the configuration names, check it, then run the ladder.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(EvaluationReport, StageTimings), EvalError> {
    config.validate()?;
    let clock = Instant::now();
    let plan = match config.plan.as_str() {
        NO_PLAN => None,
        name => Some(resolve_plan(name)?),
    };
    let (spec, state) = load_network(&config.network, &config.weights)?;
    let tap = FeatureTap::new(&spec, &state, &config.layer)?;
    let corpus = load_corpus(&config.corpus_root, config.working_resolution)?;
    let corpus = select_subset(&corpus, config.per_category, derive_seed(config.seed, SUBSET_STREAM))?;
    let load = clock.elapsed().as_secs_f64();
    let (report, mut timings) = run_on(&corpus, &tap, plan.as_ref(), config)?;
    timings.stages.insert(0, ("load".to_string(), load));
    timings.record("total", clock.elapsed().as_secs_f64());
    Ok((report, timings))
}
