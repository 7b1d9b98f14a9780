use super::pnm::{decode_pgm, DecodeError};
use crate::raster::Raster;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Default square working resolution for dilation and pixel-unit transforms.
pub const DEFAULT_WORKING_RESOLUTION: usize = 256;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        source: DecodeError,
    },
    #[error("category `{category}` has no PGM files ({path})")]
    EmptyCategory { category: String, path: PathBuf },
    #[error("no category directories under {0}")]
    NoCategories(PathBuf),
    #[error("category `{category}` has {have} sketches, {need} required")]
    Undersized {
        category: String,
        have: usize,
        need: usize,
    },
    #[error("inconsistent corpus: {0}")]
    Inconsistent(String),
}

/// Lineage of a sketch raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Dilated,
    /// Produced by the transform at this index of the augmentation plan.
    Augmented(usize),
}

/// A point sequence of one pen stroke, in pixel coordinates.
pub type Stroke = Vec<(f32, f32)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub id: String,
    pub category: String,
    pub raster: Raster,
    pub provenance: Provenance,
    /// Carried along untouched; nothing in the pipeline reads it.
    pub strokes: Option<Vec<Stroke>>,
}

impl Sketch {
    pub fn original(id: impl Into<String>, category: impl Into<String>, raster: Raster) -> Self {
        Self {
            id: id.into(),
            category: category.into(),
            raster,
            provenance: Provenance::Original,
            strokes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    categories: Vec<String>,
    sketches: Vec<Vec<Sketch>>,
    working_resolution: usize,
}

impl Corpus {
    /// Build a corpus; `sketches[i]` holds the sketches of `categories[i]`.
    pub fn new(
        categories: Vec<String>,
        sketches: Vec<Vec<Sketch>>,
        working_resolution: usize,
    ) -> Result<Self, CorpusError> {
        if categories.len() != sketches.len() {
            return Err(CorpusError::Inconsistent(format!(
                "{} categories but {} sketch lists",
                categories.len(),
                sketches.len()
            )));
        }
        for (name, list) in categories.iter().zip(&sketches) {
            if let Some(s) = list.iter().find(|s| &s.category != name) {
                return Err(CorpusError::Inconsistent(format!(
                    "sketch `{}` labelled `{}` filed under `{}`",
                    s.id, s.category, name
                )));
            }
        }
        Ok(Self {
            categories,
            sketches,
            working_resolution,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category(&self, index: usize) -> &[Sketch] {
        &self.sketches[index]
    }

    pub fn per_category(&self) -> impl Iterator<Item = (&str, &[Sketch])> {
        self.categories
            .iter()
            .map(String::as_str)
            .zip(self.sketches.iter().map(Vec::as_slice))
    }

    pub fn counts(&self) -> Vec<usize> {
        self.sketches.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.sketches.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn working_resolution(&self) -> usize {
        self.working_resolution
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sketch> {
        self.sketches.iter().flatten()
    }
}

/// Convert a decoded dark-on-light raster to the binary ink convention at
/// `working_resolution x working_resolution`.
pub fn preprocess(raster: &Raster, working_resolution: usize) -> Raster {
    let mut ink = raster.clone();
    for v in ink.data_mut() {
        *v = if *v < 0.5 { 1.0 } else { 0.0 };
    }
    ink.resize(working_resolution, working_resolution)
        .threshold(0.5)
}

fn read_dir_sorted(path: &Path) -> Result<Vec<fs::DirEntry>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut entries = fs::read_dir(path)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn is_pgm(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Encode a working raster (ink = 1) as a sketch file: black ink on white.
/// [`load_corpus`] reads it back unchanged.
pub fn encode_sketch_pgm(raster: &Raster) -> Vec<u8> {
    let mut paper = raster.clone();
    for v in paper.data_mut() {
        *v = 1.0 - *v;
    }
    super::pnm::encode_pgm(&paper)
}

/// Load `<root>/<category>/<file>.pgm`. Categories are ordered by directory
/// name, sketches by file name; ids are `<category>/<file stem>`.
pub fn load_corpus(root: &Path, working_resolution: usize) -> Result<Corpus, CorpusError> {
    let mut categories = Vec::new();
    let mut sketches = Vec::new();
    for entry in read_dir_sorted(root)? {
        let dir = entry.path();
        if !dir.is_dir() {
            continue;
        }
        let category = entry.file_name().to_string_lossy().into_owned();
        let mut list = Vec::new();
        for file in read_dir_sorted(&dir)? {
            let path = file.path();
            if !is_pgm(&path) {
                continue;
            }
            let bytes = fs::read(&path).map_err(|source| CorpusError::Io {
                path: path.clone(),
                source,
            })?;
            let raster = decode_pgm(&bytes).map_err(|source| CorpusError::Decode {
                path: path.clone(),
                source,
            })?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            list.push(Sketch::original(
                format!("{category}/{stem}"),
                category.clone(),
                preprocess(&raster, working_resolution),
            ));
        }
        if list.is_empty() {
            return Err(CorpusError::EmptyCategory { category, path: dir });
        }
        categories.push(category);
        sketches.push(list);
    }
    if categories.is_empty() {
        return Err(CorpusError::NoCategories(root.to_path_buf()));
    }
    Corpus::new(categories, sketches, working_resolution)
}

/// Keep exactly `per_category` sketches per category, drawn uniformly without
/// replacement. Survivors keep their original relative order.
pub fn select_subset(corpus: &Corpus, per_category: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if let Some((name, list)) = corpus.per_category().find(|(_, l)| l.len() < per_category) {
        return Err(CorpusError::Undersized {
            category: name.to_string(),
            have: list.len(),
            need: per_category,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sketches = corpus
        .sketches
        .iter()
        .map(|list| {
            let mut picked = rand::seq::index::sample(&mut rng, list.len(), per_category).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| list[i].clone()).collect()
        })
        .collect();
    Corpus::new(corpus.categories.clone(), sketches, corpus.working_resolution)
}
