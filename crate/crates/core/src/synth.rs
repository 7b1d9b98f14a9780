//! Procedural glyph sketches: an unlimited supply of stroke-drawn categories
//! for tests and desk-scale experiments.

use crate::raster::Raster;
use crate::sketch_io::{encode_sketch_pgm, Corpus, CorpusError, Sketch, Stroke};
use crate::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};
use std::path::Path;

const FAMILY_SALT: u64 = 0x6c79_7068_5f66_616d;

/// Stroke width as a fraction of the raster side.
pub const STROKE_WIDTH: f64 = 0.035;

pub type Polyline = Vec<(f64, f64)>;

pub fn family_name(index: usize) -> String {
    format!("glyph-{index:03}")
}

/// A glyph category: a fixed arrangement of strokes in `[-1, 1]^2`
/// (x right, y down).
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphFamily {
    strokes: Vec<Polyline>,
}

fn arc(rng: &mut ChaCha8Rng, closed: bool) -> Polyline {
    let (cx, cy) = (rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
    let (rx, ry) = (rng.gen_range(0.2..0.6), rng.gen_range(0.2..0.6));
    let start = rng.gen_range(0.0..TAU);
    let sweep = if closed { TAU } else { rng.gen_range(0.6 * PI..1.5 * PI) };
    let n = 24;
    (0..=n)
        .map(|i| {
            let a = start + sweep * i as f64 / n as f64;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn polygon(rng: &mut ChaCha8Rng) -> Polyline {
    let sides = rng.gen_range(3..=6);
    let (cx, cy) = (rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35));
    let r = rng.gen_range(0.25..0.6);
    let turn = rng.gen_range(0.0..TAU);
    (0..=sides)
        .map(|i| {
            let a = turn + TAU * i as f64 / sides as f64;
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

fn segment(rng: &mut ChaCha8Rng) -> Polyline {
    let a = rng.gen_range(0.0..PI);
    let len = rng.gen_range(0.6..1.6);
    let (cx, cy) = (rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
    let (dx, dy) = (0.5 * len * a.cos(), 0.5 * len * a.sin());
    vec![(cx - dx, cy - dy), (cx + dx, cy + dy)]
}

fn zigzag(rng: &mut ChaCha8Rng) -> Polyline {
    let teeth = rng.gen_range(2..=5);
    let a = rng.gen_range(0.0..PI);
    let (len, amp) = (rng.gen_range(0.8..1.6), rng.gen_range(0.1..0.3));
    let (cx, cy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let (ux, uy, vx, vy) = (a.cos(), a.sin(), -a.sin(), a.cos());
    (0..=2 * teeth)
        .map(|i| {
            let t = len * (i as f64 / (2 * teeth) as f64 - 0.5);
            let s = if i % 2 == 0 { -amp } else { amp };
            (cx + t * ux + s * vx, cy + t * uy + s * vy)
        })
        .collect()
}

fn wave(rng: &mut ChaCha8Rng) -> Polyline {
    let a = rng.gen_range(0.0..PI);
    let (len, amp) = (rng.gen_range(0.8..1.6), rng.gen_range(0.08..0.25));
    let cycles = rng.gen_range(1.0..3.0);
    let (cx, cy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let (ux, uy, vx, vy) = (a.cos(), a.sin(), -a.sin(), a.cos());
    let n = 32;
    (0..=n)
        .map(|i| {
            let f = i as f64 / n as f64;
            let t = len * (f - 0.5);
            let s = amp * (TAU * cycles * f).sin();
            (cx + t * ux + s * vx, cy + t * uy + s * vy)
        })
        .collect()
}

fn spiral(rng: &mut ChaCha8Rng) -> Polyline {
    let (cx, cy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let turns = rng.gen_range(1.2..2.5);
    let r = rng.gen_range(0.3..0.6);
    let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let n = 48;
    (0..=n)
        .map(|i| {
            let f = i as f64 / n as f64;
            let a = dir * TAU * turns * f;
            (cx + r * f * a.cos(), cy + r * f * a.sin())
        })
        .collect()
}

impl GlyphFamily {
    /// Family `index`; the same index always yields the same family.
    pub fn new(index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(FAMILY_SALT, index as u64));
        let count = rng.gen_range(2..=4);
        let strokes = (0..count)
            .map(|_| match rng.gen_range(0..7) {
                0 => arc(&mut rng, true),
                1 => arc(&mut rng, false),
                2 => polygon(&mut rng),
                3 => segment(&mut rng),
                4 => zigzag(&mut rng),
                5 => wave(&mut rng),
                _ => spiral(&mut rng),
            })
            .collect();
        Self { strokes }
    }

    pub fn template(&self) -> &[Polyline] {
        &self.strokes
    }

    /// A hand-drawn-looking instance: a random similarity transform with
    /// slight shear, an independent offset and twist for every stroke, wobble
    /// on every point, and now and then a missing stroke. `jitter = 0`
    /// returns the template.
    pub fn sample(&self, rng: &mut impl Rng, jitter: f64) -> Vec<Polyline> {
        let angle = jitter * rng.gen_range(-0.2..0.2);
        let scale = 1.0 + jitter * rng.gen_range(-0.15..0.1);
        let shear = jitter * rng.gen_range(-0.15..0.15);
        let (tx, ty) = (jitter * rng.gen_range(-0.1..0.1), jitter * rng.gen_range(-0.1..0.1));
        let (s, c) = angle.sin_cos();
        let dropped = if self.strokes.len() > 1 && rng.gen_bool((0.1 * jitter).min(1.0)) {
            Some(rng.gen_range(0..self.strokes.len()))
        } else {
            None
        };
        self.strokes
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != dropped)
            .map(|(_, stroke)| {
                let (ox, oy) = (jitter * rng.gen_range(-0.12..0.12), jitter * rng.gen_range(-0.12..0.12));
                let (ps, pc) = (jitter * rng.gen_range(-0.15..0.15)).sin_cos();
                let n = stroke.len() as f64;
                let (mx, my) = stroke.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
                stroke
                    .iter()
                    .map(|&(x, y)| {
                        let (dx, dy) = (x - mx, y - my);
                        let (x, y) = (mx + pc * dx - ps * dy + ox, my + ps * dx + pc * dy + oy);
                        let x = x + shear * y;
                        let (wx, wy) = (jitter * rng.gen_range(-0.03..0.03), jitter * rng.gen_range(-0.03..0.03));
                        (scale * (c * x - s * y) + tx + wx, scale * (s * x + c * y) + ty + wy)
                    })
                    .collect()
            })
            .collect()
    }
}

fn to_pixels(p: (f64, f64), resolution: usize) -> (f64, f64) {
    let r = resolution as f64;
    ((p.0 * 0.8 + 1.0) * 0.5 * r, (p.1 * 0.8 + 1.0) * 0.5 * r)
}

/// Rasterize strokes (in `[-1, 1]^2`, 10% margin) with round caps: a pixel is
/// ink when its centre lies within half the stroke width of any segment.
pub fn render_glyph(strokes: &[Polyline], resolution: usize, width_px: f64) -> Raster {
    let mut out = Raster::zeros(resolution, resolution);
    let half = width_px / 2.0;
    for stroke in strokes {
        let pts: Vec<(f64, f64)> = stroke.iter().map(|&p| to_pixels(p, resolution)).collect();
        let pairs: Vec<_> = if pts.len() == 1 {
            vec![(pts[0], pts[0])]
        } else {
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        };
        for ((x0, y0), (x1, y1)) in pairs {
            let clamp = |v: f64| v.max(0.0).min(resolution as f64 - 1.0) as usize;
            let (c0, c1) = (clamp(x0.min(x1) - half - 1.0), clamp(x0.max(x1) + half + 1.0));
            let (r0, r1) = (clamp(y0.min(y1) - half - 1.0), clamp(y0.max(y1) + half + 1.0));
            let (dx, dy) = (x1 - x0, y1 - y0);
            let len2 = dx * dx + dy * dy;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
                    let t = if len2 > 0.0 {
                        (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (qx, qy) = (x0 + t * dx - px, y0 + t * dy - py);
                    if qx * qx + qy * qy <= half * half {
                        out.set(row, col, 1.0);
                    }
                }
            }
        }
    }
    out
}

/// `per_category` jittered sketches for each of families `0..families`.
pub fn glyph_corpus(families: usize, per_category: usize, resolution: usize, seed: u64) -> Result<Corpus, CorpusError> {
    let width = STROKE_WIDTH * resolution as f64;
    let sketches: Vec<Vec<Sketch>> = (0..families)
        .into_par_iter()
        .map(|f| {
            let family = GlyphFamily::new(f);
            let name = family_name(f);
            (0..per_category)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (f as u64) << 32 | i as u64));
                    let strokes = family.sample(&mut rng, 1.0);
                    let mut sketch = Sketch::original(
                        format!("{name}/{i:04}"),
                        name.clone(),
                        render_glyph(&strokes, resolution, width),
                    );
                    sketch.strokes = Some(
                        strokes
                            .iter()
                            .map(|s| {
                                s.iter()
                                    .map(|&p| {
                                        let (x, y) = to_pixels(p, resolution);
                                        (x as f32, y as f32)
                                    })
                                    .collect::<Stroke>()
                            })
                            .collect(),
                    );
                    sketch
                })
                .collect()
        })
        .collect();
    Corpus::new((0..families).map(family_name).collect(), sketches, resolution)
}

/// Write a corpus as `<root>/<category>/<nnnn>.pgm`, dark ink on white.
pub fn write_corpus(corpus: &Corpus, root: &Path) -> std::io::Result<()> {
    for (category, sketches) in corpus.per_category() {
        let dir = root.join(category);
        std::fs::create_dir_all(&dir)?;
        for s in sketches {
            let stem = s.id.rsplit('/').next().unwrap_or(&s.id);
            crate::fsutil::write_atomic(&dir.join(format!("{stem}.pgm")), &encode_sketch_pgm(&s.raster))?;
        }
    }
    Ok(())
}
