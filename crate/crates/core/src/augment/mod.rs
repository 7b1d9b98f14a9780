//! Sketch augmentation: mandatory 5x5 dilation ("thickening") followed by a
//! declarative plan of geometric transforms, one variant per transform.

mod plan;
mod transform;

pub use plan::{preset_paper30, resolve_plan, AugmentationPlan, PAPER30};
pub use transform::{apply_transform, Axis, Transform};

use crate::raster::Raster;
use crate::sketch_io::{Provenance, Sketch};
use thiserror::Error;

/// Half-width of the square structuring element (5x5).
pub const DILATION_RADIUS: usize = 2;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("raster is not binary")]
    NonBinary,
    #[error("sketch `{id}` has provenance {found:?}, expected {expected:?}")]
    WrongProvenance {
        id: String,
        found: Provenance,
        expected: Provenance,
    },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid augmentation plan: {0}")]
    InvalidPlan(String),
    #[error("plan file {path}: {source}")]
    PlanFile {
        path: std::path::PathBuf,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// Binary dilation by a 5x5 square centred on each ink pixel, clipped at the
/// borders.
pub fn dilate(raster: &Raster) -> Result<Raster, AugmentError> {
    if !raster.is_binary() {
        return Err(AugmentError::NonBinary);
    }
    let (h, w) = (raster.height(), raster.width());
    // The square is separable: a horizontal 1x5 max followed by a vertical 5x1 max.
    let mut rows = Raster::zeros(h, w);
    for r in 0..h {
        let src = raster.row(r);
        for c in 0..w {
            let lo = c.saturating_sub(DILATION_RADIUS);
            let hi = (c + DILATION_RADIUS).min(w - 1);
            if src[lo..=hi].iter().any(|&v| v != 0.0) {
                rows.set(r, c, 1.0);
            }
        }
    }
    let mut out = Raster::zeros(h, w);
    for r in 0..h {
        let lo = r.saturating_sub(DILATION_RADIUS);
        let hi = (r + DILATION_RADIUS).min(h - 1);
        for c in 0..w {
            if (lo..=hi).any(|rr| rows.get(rr, c) != 0.0) {
                out.set(r, c, 1.0);
            }
        }
    }
    Ok(out)
}

/// Original -> dilated.
pub fn dilate_sketch(sketch: &Sketch) -> Result<Sketch, AugmentError> {
    if sketch.provenance != Provenance::Original {
        return Err(AugmentError::WrongProvenance {
            id: sketch.id.clone(),
            found: sketch.provenance,
            expected: Provenance::Original,
        });
    }
    Ok(Sketch {
        raster: dilate(&sketch.raster)?,
        provenance: Provenance::Dilated,
        ..sketch.clone()
    })
}

/// Id of the `index`-th variant of `parent`. Corpus ids contain exactly one
/// `/`, variant ids two, so variant ids never collide with originals.
pub fn variant_id(parent: &str, index: usize) -> String {
    format!("{parent}/t{index:02}")
}

/// Dilated -> one augmented sketch per plan transform, in plan order.
pub fn expand(sketch: &Sketch, plan: &AugmentationPlan) -> Result<Vec<Sketch>, AugmentError> {
    if sketch.provenance != Provenance::Dilated {
        return Err(AugmentError::WrongProvenance {
            id: sketch.id.clone(),
            found: sketch.provenance,
            expected: Provenance::Dilated,
        });
    }
    if !sketch.raster.is_binary() {
        return Err(AugmentError::NonBinary);
    }
    Ok(plan
        .transforms()
        .iter()
        .enumerate()
        .map(|(i, t)| Sketch {
            id: variant_id(&sketch.id, i),
            category: sketch.category.clone(),
            raster: transform::apply_unchecked(&sketch.raster, t),
            provenance: Provenance::Augmented(i),
            strokes: sketch.strokes.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_binary(h: usize, w: usize, density: f64, seed: u64) -> Raster {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Raster::from_fn(h, w, |_, _| if rng.gen_bool(density) { 1.0 } else { 0.0 })
    }

    /// Per-pixel max over the clipped 5x5 window.
    fn dilate_oracle(x: &Raster) -> Raster {
        let (h, w) = (x.height() as i64, x.width() as i64);
        Raster::from_fn(x.height(), x.width(), |r, c| {
            let mut m = 0.0f32;
            for dr in -2i64..=2 {
                for dc in -2i64..=2 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr >= 0 && rr < h && cc >= 0 && cc < w {
                        m = m.max(x.get(rr as usize, cc as usize));
                    }
                }
            }
            m
        })
    }

    #[test]
    fn empty_stays_empty() {
        assert_eq!(dilate(&Raster::zeros(7, 9)).unwrap(), Raster::zeros(7, 9));
    }

    #[test]
    fn single_pixel_becomes_square() {
        let mut r = Raster::zeros(28, 28);
        r.set(10, 10, 1.0);
        let d = dilate(&r).unwrap();
        assert_eq!(d.ink_count(), 25);
        for row in 8..=12 {
            for c in 8..=12 {
                assert_eq!(d.get(row, c), 1.0);
            }
        }
    }

    #[test]
    fn matches_window_max_oracle() {
        for seed in 0..20 {
            let r = random_binary(64, 64, 0.02, seed);
            assert_eq!(dilate(&r).unwrap(), dilate_oracle(&r));
        }
    }

    #[test]
    fn non_binary_is_rejected() {
        let r = Raster::new(1, 1, vec![0.3]).unwrap();
        assert!(matches!(dilate(&r), Err(AugmentError::NonBinary)));
    }

    fn sketch(raster: Raster) -> Sketch {
        Sketch::original("cat/one", "cat", raster)
    }

    #[test]
    fn provenance_chain_is_enforced() {
        let s = sketch(Raster::zeros(8, 8));
        let plan = preset_paper30();
        assert!(matches!(
            expand(&s, &plan),
            Err(AugmentError::WrongProvenance { .. })
        ));
        let d = dilate_sketch(&s).unwrap();
        assert_eq!(d.provenance, Provenance::Dilated);
        assert!(dilate_sketch(&d).is_err());
        let variants = expand(&d, &plan).unwrap();
        assert_eq!(variants.len(), 30);
        for (i, v) in variants.iter().enumerate() {
            assert_eq!(v.provenance, Provenance::Augmented(i));
            assert_eq!(v.category, "cat");
            assert_eq!(v.id, format!("cat/one/t{i:02}"));
        }
    }

    #[test]
    fn mirror_of_symmetric_sketch_is_unchanged() {
        let r = Raster::from_fn(16, 16, |row, c| if c == 7 || c == 8 || row == 3 { 1.0 } else { 0.0 });
        let d = dilate_sketch(&sketch(r)).unwrap();
        let plan = AugmentationPlan::new("flip", vec![Transform::Mirror { axis: Axis::Vertical }]).unwrap();
        let out = expand(&d, &plan).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].raster, d.raster);
    }

    proptest! {
        #[test]
        fn dilation_is_extensive(seed in 0u64..10_000, h in 1usize..40, w in 1usize..40) {
            let r = random_binary(h, w, 0.05, seed);
            let d = dilate(&r).unwrap();
            prop_assert!(r.data().iter().zip(d.data()).all(|(&a, &b)| a <= b));
        }

        #[test]
        fn dilation_commutes_with_shift_on_interior(seed in 0u64..10_000, dx in -15i32..=15, dy in -15i32..=15) {
            let r = random_binary(64, 64, 0.02, seed);
            let shift = Transform::Shift { dx, dy };
            let a = dilate(&apply_transform(&r, &shift).unwrap()).unwrap();
            let b = apply_transform(&dilate(&r).unwrap(), &shift).unwrap();
            for row in 17..47 {
                for c in 17..47 {
                    prop_assert_eq!(a.get(row, c), b.get(row, c));
                }
            }
        }
    }
}
