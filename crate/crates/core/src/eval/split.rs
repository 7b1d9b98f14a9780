use super::EvalError;
use crate::derive_seed;
use crate::sketch_io::Corpus;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Position of an original sketch: category index and index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SketchRef {
    pub category: usize,
    pub index: usize,
}

/// Originals on each side of one train/test split, category by category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<SketchRef>,
    pub test: Vec<SketchRef>,
}

impl Split {
    pub fn train_ids<'a>(&self, corpus: &'a Corpus) -> Vec<&'a str> {
        ids(corpus, &self.train)
    }

    pub fn test_ids<'a>(&self, corpus: &'a Corpus) -> Vec<&'a str> {
        ids(corpus, &self.test)
    }
}

fn ids<'a>(corpus: &'a Corpus, refs: &[SketchRef]) -> Vec<&'a str> {
    refs.iter()
        .map(|r| corpus.category(r.category)[r.index].id.as_str())
        .collect()
}

/// Permute each category with a seed derived from `shuffle_seed` and the
/// category index; the first `t` go to training. Splits of one seed are
/// nested: a larger `t` only moves sketches from test to train.
pub fn make_splits(corpus: &Corpus, t: usize, shuffle_seed: u64) -> Result<Split, EvalError> {
    if let Some((name, list)) = corpus.per_category().find(|(_, l)| t == 0 || t >= l.len()) {
        return Err(EvalError::Contract(format!(
            "train count {t} outside 1..{} for category `{name}`",
            list.len()
        )));
    }
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for category in 0..corpus.categories().len() {
        let mut order: Vec<usize> = (0..corpus.category(category).len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(shuffle_seed, category as u64)));
        let (train, test) = order.split_at(t);
        split.train.extend(train.iter().map(|&index| SketchRef { category, index }));
        split.test.extend(test.iter().map(|&index| SketchRef { category, index }));
    }
    Ok(split)
}

/// One feature vector the experiment consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Record {
    Dilated(SketchRef),
    /// Variant number `.1` of the plan applied to the dilated sketch.
    Variant(SketchRef, usize),
}

impl Record {
    pub fn original(&self) -> SketchRef {
        match *self {
            Record::Dilated(r) | Record::Variant(r, _) => r,
        }
    }
}

/// Every plan variant of every training original, optionally preceded by the
/// dilated original itself.
pub fn training_records(split: &Split, plan_size: usize, include_dilated: bool) -> Vec<Record> {
    let mut out = Vec::with_capacity(split.train.len() * (plan_size + usize::from(include_dilated)));
    for &r in &split.train {
        if include_dilated {
            out.push(Record::Dilated(r));
        }
        out.extend((0..plan_size).map(|v| Record::Variant(r, v)));
    }
    out
}

/// Test sketches are only ever the dilated originals.
pub fn test_records(split: &Split) -> Vec<Record> {
    split.test.iter().map(|&r| Record::Dilated(r)).collect()
}
