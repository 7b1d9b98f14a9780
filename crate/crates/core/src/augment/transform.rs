use super::AugmentError;
use crate::raster::{sample_bilinear_zero, Raster};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Reflect across the vertical axis (left-right flip).
    Vertical,
    /// Reflect across the horizontal axis (top-bottom flip).
    Horizontal,
}

/// A dimension-preserving geometric transform of a binary raster.
///
/// Serialized as `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Transform {
    Mirror { axis: Axis },
    /// Counter-clockwise as displayed, in degrees, about the raster centre.
    Rotate { angle: f64 },
    /// Positive `dx` moves ink right, positive `dy` moves it down.
    Shift { dx: i32, dy: i32 },
    /// Central zoom by `percent` of the image size: scale `1 + percent/100`.
    Zoom { percent: f64 },
    /// Applied left to right.
    Compose { transforms: Vec<Transform> },
}

impl Transform {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |msg: String| Err(AugmentError::InvalidTransform(msg));
        match self {
            Transform::Rotate { angle } if !angle.is_finite() || angle.abs() > 180.0 => {
                bad(format!("rotation angle {angle} outside [-180, 180]"))
            }
            Transform::Zoom { percent } if !percent.is_finite() || *percent <= -100.0 => {
                bad(format!("zoom percent {percent} must be finite and > -100"))
            }
            Transform::Compose { transforms } if transforms.is_empty() => {
                bad("empty composition".into())
            }
            Transform::Compose { transforms } => transforms.iter().try_for_each(Transform::validate),
            _ => Ok(()),
        }
    }

    /// Short stable label, e.g. `rot+5` or `mirror_v+rot-15`.
    pub fn label(&self) -> String {
        match self {
            Transform::Mirror { axis: Axis::Vertical } => "mirror_v".into(),
            Transform::Mirror { axis: Axis::Horizontal } => "mirror_h".into(),
            Transform::Rotate { angle } => format!("rot{angle:+}"),
            Transform::Shift { dx, dy } => format!("shift{dx:+}{dy:+}"),
            Transform::Zoom { percent } => format!("zoom{percent:+}"),
            Transform::Compose { transforms } => transforms
                .iter()
                .map(Transform::label)
                .collect::<Vec<_>>()
                .join("+"),
        }
    }
}

/// Apply `transform` to a binary raster; the output has the same dimensions
/// and is binary.
pub fn apply_transform(raster: &Raster, transform: &Transform) -> Result<Raster, AugmentError> {
    if !raster.is_binary() {
        return Err(AugmentError::NonBinary);
    }
    transform.validate()?;
    Ok(apply_unchecked(raster, transform))
}

pub(crate) fn apply_unchecked(raster: &Raster, transform: &Transform) -> Raster {
    match transform {
        Transform::Mirror { axis } => mirror(raster, *axis),
        Transform::Shift { dx, dy } => shift(raster, *dx, *dy),
        Transform::Rotate { angle } => {
            let (sin, cos) = angle.to_radians().sin_cos();
            resample(raster, |dy, dx| (dx * sin + dy * cos, dx * cos - dy * sin))
        }
        Transform::Zoom { percent } => {
            let inv = 1.0 / (1.0 + percent / 100.0);
            resample(raster, |dy, dx| (dy * inv, dx * inv))
        }
        Transform::Compose { transforms } => transforms
            .iter()
            .fold(raster.clone(), |acc, t| apply_unchecked(&acc, t)),
    }
}

fn mirror(raster: &Raster, axis: Axis) -> Raster {
    let (h, w) = (raster.height(), raster.width());
    match axis {
        Axis::Vertical => Raster::from_fn(h, w, |r, c| raster.get(r, w - 1 - c)),
        Axis::Horizontal => Raster::from_fn(h, w, |r, c| raster.get(h - 1 - r, c)),
    }
}

fn shift(raster: &Raster, dx: i32, dy: i32) -> Raster {
    let (h, w) = (raster.height() as i64, raster.width() as i64);
    let (dx, dy) = (i64::from(dx), i64::from(dy));
    let mut out = Raster::zeros(raster.height(), raster.width());
    for r in 0..h {
        let tr = r + dy;
        if tr < 0 || tr >= h {
            continue;
        }
        for c in 0..w {
            let tc = c + dx;
            if tc >= 0 && tc < w {
                out.set(tr as usize, tc as usize, raster.get(r as usize, c as usize));
            }
        }
    }
    out
}

/// Inverse-map every output pixel through `source_offset` (offsets from the
/// centre, `(dy, dx) -> (dy, dx)`), sample bilinearly, re-binarize at 0.5.
fn resample(raster: &Raster, source_offset: impl Fn(f64, f64) -> (f64, f64)) -> Raster {
    let cy = (raster.height() as f64 - 1.0) / 2.0;
    let cx = (raster.width() as f64 - 1.0) / 2.0;
    Raster::from_fn(raster.height(), raster.width(), |r, c| {
        let (sy, sx) = source_offset(r as f64 - cy, c as f64 - cx);
        if sample_bilinear_zero(raster, cy + sy, cx + sx) >= 0.5 {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_binary(h: usize, w: usize, seed: u64) -> Raster {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Raster::from_fn(h, w, |_, _| if rng.gen_bool(0.3) { 1.0 } else { 0.0 })
    }

    #[test]
    fn mirror_is_an_involution() {
        let r = random_binary(9, 13, 1);
        for axis in [Axis::Vertical, Axis::Horizontal] {
            let t = Transform::Mirror { axis };
            let once = apply_transform(&r, &t).unwrap();
            assert_ne!(once, r);
            assert_eq!(apply_transform(&once, &t).unwrap(), r);
        }
    }

    #[test]
    fn shift_moves_ink_right() {
        let r = random_binary(20, 20, 2);
        let s = apply_transform(&r, &Transform::Shift { dx: 5, dy: 0 }).unwrap();
        for row in 0..20 {
            for c in 0..20 {
                let expected = if c >= 5 { r.get(row, c - 5) } else { 0.0 };
                assert_eq!(s.get(row, c), expected);
            }
        }
    }

    #[test]
    fn zero_rotation_and_zoom_are_identity() {
        let r = random_binary(16, 11, 3);
        assert_eq!(apply_transform(&r, &Transform::Rotate { angle: 0.0 }).unwrap(), r);
        assert_eq!(apply_transform(&r, &Transform::Zoom { percent: 0.0 }).unwrap(), r);
    }

    #[test]
    fn quarter_turn_moves_right_edge_to_top() {
        // Ink on the right edge ends on the top edge after +90 (counter-clockwise).
        let mut r = Raster::zeros(5, 5);
        r.set(2, 4, 1.0);
        let out = apply_transform(&r, &Transform::Rotate { angle: 90.0 }).unwrap();
        assert_eq!(out.get(0, 2), 1.0);
        assert_eq!(out.ink_count(), 1);
    }

    #[test]
    fn zoom_in_moves_ink_outward() {
        let mut r = Raster::zeros(101, 101);
        r.set(50, 70, 1.0);
        r.set(50, 71, 1.0);
        r.set(50, 72, 1.0);
        let out = apply_transform(&r, &Transform::Zoom { percent: 10.0 }).unwrap();
        // 20 px right of centre becomes 22.
        assert_eq!(out.get(50, 72), 1.0);
        assert_eq!(out.get(50, 70), 0.0);
    }

    #[test]
    fn negative_zoom_pads_with_background() {
        let r = Raster::from_fn(20, 20, |_, _| 1.0);
        let out = apply_transform(&r, &Transform::Zoom { percent: -50.0 }).unwrap();
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(10, 10), 1.0);
    }

    #[test]
    fn compose_applies_left_to_right() {
        let r = random_binary(12, 12, 4);
        let a = Transform::Shift { dx: 3, dy: 0 };
        let b = Transform::Mirror { axis: Axis::Vertical };
        let composed = Transform::Compose {
            transforms: vec![a.clone(), b.clone()],
        };
        let manual = apply_transform(&apply_transform(&r, &a).unwrap(), &b).unwrap();
        assert_eq!(apply_transform(&r, &composed).unwrap(), manual);
    }

    #[test]
    fn rejects_invalid_input() {
        let r = Raster::new(1, 2, vec![0.5, 1.0]).unwrap();
        assert!(matches!(
            apply_transform(&r, &Transform::Shift { dx: 1, dy: 0 }),
            Err(AugmentError::NonBinary)
        ));
        let ok = Raster::zeros(3, 3);
        for t in [
            Transform::Rotate { angle: 181.0 },
            Transform::Zoom { percent: -100.0 },
            Transform::Compose { transforms: vec![] },
        ] {
            assert!(matches!(
                apply_transform(&ok, &t),
                Err(AugmentError::InvalidTransform(_))
            ));
        }
    }

    #[test]
    fn json_shape() {
        let t = Transform::Compose {
            transforms: vec![
                Transform::Mirror { axis: Axis::Vertical },
                Transform::Rotate { angle: -5.0 },
            ],
        };
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"compose","params":{"transforms":[{"kind":"mirror","params":{"axis":"vertical"}},{"kind":"rotate","params":{"angle":-5.0}}]}}"#
        );
        assert_eq!(serde_json::from_str::<Transform>(&json).unwrap(), t);
    }

    fn transform() -> impl Strategy<Value = Transform> {
        let leaf = prop_oneof![
            prop_oneof![Just(Axis::Vertical), Just(Axis::Horizontal)]
                .prop_map(|axis| Transform::Mirror { axis }),
            (-180.0f64..180.0).prop_map(|angle| Transform::Rotate { angle }),
            (-20i32..20, -20i32..20).prop_map(|(dx, dy)| Transform::Shift { dx, dy }),
            (-50.0f64..50.0).prop_map(|percent| Transform::Zoom { percent }),
        ];
        leaf.prop_recursive(2, 6, 3, |inner| {
            proptest::collection::vec(inner, 1..3).prop_map(|transforms| Transform::Compose { transforms })
        })
    }

    proptest! {
        #[test]
        fn transforms_preserve_shape_and_binarity(t in transform(), seed in 0u64..1000, h in 1usize..24, w in 1usize..24) {
            let r = random_binary(h, w, seed);
            let out = apply_transform(&r, &t).unwrap();
            prop_assert_eq!((out.height(), out.width()), (h, w));
            prop_assert!(out.is_binary());
        }

        #[test]
        fn shift_round_trip_is_identity_on_interior(dx in -15i32..=15, dy in -15i32..=15, seed in 0u64..1000) {
            let r = random_binary(48, 48, seed);
            let there = apply_transform(&r, &Transform::Shift { dx, dy }).unwrap();
            let back = apply_transform(&there, &Transform::Shift { dx: -dx, dy: -dy }).unwrap();
            for row in 15..33 {
                for c in 15..33 {
                    prop_assert_eq!(back.get(row, c), r.get(row, c));
                }
            }
        }
    }
}
