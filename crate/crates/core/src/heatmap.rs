//! Activation heat-maps: how strongly a spatial layer fires at each location,
//! as a grayscale or false-colour image.

use crate::net::{forward, raster_to_input, NetError, NetworkSpec, NetworkState, Tensor};
use crate::raster::Raster;
use crate::sketch_io::{encode_pgm_image, encode_ppm, GrayImage, RgbImage};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub layer: String,
    /// `(H', W')` of the tapped layer.
    pub grid_shape: (usize, usize),
    /// Row-major, in `[0, 1]`.
    pub grid: Vec<f64>,
    /// `(H, W)` of the network input.
    pub shape: (usize, usize),
    pub upsampled: Vec<f64>,
}

/// Per-cell `sum_c |a_c|` of a `C x H x W` activation block, min-max
/// normalized. A constant map normalizes to zero.
pub fn aggregate(activations: &[f32], [c, h, w]: [usize; 3]) -> Vec<f64> {
    let mut cells = vec![0.0f64; h * w];
    for channel in activations.chunks_exact(h * w).take(c) {
        for (cell, &a) in cells.iter_mut().zip(channel) {
            *cell += f64::from(a).abs();
        }
    }
    let lo = cells.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in &mut cells {
        *v = if hi > lo { ((*v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    }
    cells
}

/// Bilinear resampling with pixel centres aligned and edges clamped.
pub fn upsample_bilinear(grid: &[f64], (h, w): (usize, usize), (out_h, out_w): (usize, usize)) -> Vec<f64> {
    let coord = |dst: usize, src_len: usize, dst_len: usize| {
        let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let i = (s.floor() as usize).min(src_len - 1);
        (i, (i + 1).min(src_len - 1), s - i as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let (r0, r1, fr) = coord(r, h, out_h);
        for c in 0..out_w {
            let (c0, c1, fc) = coord(c, w, out_w);
            let top = grid[r0 * w + c0] * (1.0 - fc) + grid[r0 * w + c1] * fc;
            let bottom = grid[r1 * w + c0] * (1.0 - fc) + grid[r1 * w + c1] * fc;
            out.push((top * (1.0 - fr) + bottom * fr).clamp(0.0, 1.0));
        }
    }
    out
}

/// Heat-map of `layer` for one sketch.
pub fn compute_heatmap(
    spec: &NetworkSpec,
    state: &NetworkState,
    raster: &Raster,
    layer: &str,
) -> Result<HeatMap, NetError> {
    let index = spec.index_of(layer)?;
    let spatial = spec.spatial_layers();
    if !spatial.iter().any(|l| l == layer) {
        return Err(NetError::Contract(format!(
            "layer `{layer}` has no spatial output; spatial layers: {}",
            spatial.join(", ")
        )));
    }
    let shape = spec.input_shape();
    let input = Tensor::new(shape.to_vec(), raster_to_input(raster, shape))?;
    let acts = forward(spec, state, &input, Some(layer))?;
    let out = spec.output_shape(index);
    let [c, h, w] = [out[0], out[1], out[2]];
    let grid = aggregate(acts.sample(layer, 0).expect("tapped layer"), [c, h, w]);
    let upsampled = upsample_bilinear(&grid, (h, w), (shape[1], shape[2]));
    Ok(HeatMap {
        layer: layer.to_string(),
        grid_shape: (h, w),
        grid,
        shape: (shape[1], shape[2]),
        upsampled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Gray,
    Color,
}

impl FromStr for RenderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gray" => Ok(Self::Gray),
            "color" => Ok(Self::Color),
            other => Err(format!("unknown render mode `{other}` (expected gray or color)")),
        }
    }
}

const ANCHORS: [[f64; 3]; 5] = [
    [0.0, 0.0, 255.0],
    [0.0, 255.0, 255.0],
    [0.0, 255.0, 0.0],
    [255.0, 255.0, 0.0],
    [255.0, 0.0, 0.0],
];

fn half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Blue, cyan, green, yellow, red at 0, 0.25, 0.5, 0.75, 1, linear between.
pub fn colormap(v: f64) -> [u8; 3] {
    let x = v.clamp(0.0, 1.0) * 4.0;
    let i = (x.floor() as usize).min(3);
    let f = x - i as f64;
    let (a, b) = (ANCHORS[i], ANCHORS[i + 1]);
    [0, 1, 2].map(|ch| half_up(a[ch] + (b[ch] - a[ch]) * f))
}

/// PGM (gray) or PPM (color) bytes of the upsampled map.
pub fn render(map: &HeatMap, mode: RenderMode) -> Vec<u8> {
    let (height, width) = map.shape;
    match mode {
        RenderMode::Gray => encode_pgm_image(&GrayImage {
            width,
            height,
            maxval: 255,
            samples: map.upsampled.iter().map(|&v| u16::from(half_up(v * 255.0))).collect(),
        }),
        RenderMode::Color => encode_ppm(&RgbImage {
            width,
            height,
            maxval: 255,
            samples: map
                .upsampled
                .iter()
                .flat_map(|&v| colormap(v).map(u16::from))
                .collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_anchors_and_midpoint() {
        assert_eq!(colormap(0.0), [0, 0, 255]);
        assert_eq!(colormap(1.0), [255, 0, 0]);
        assert_eq!(colormap(0.5), [0, 255, 0]);
        assert_eq!(colormap(0.375), [0, 255, 128]);
        assert_eq!(colormap(0.75), [255, 255, 0]);
    }

    #[test]
    fn constant_map_is_zero() {
        assert_eq!(aggregate(&[2.0; 8], [2, 2, 2]), vec![0.0; 4]);
    }

    #[test]
    fn upsampling_preserves_constants_and_corners() {
        assert_eq!(upsample_bilinear(&[0.25; 4], (2, 2), (5, 7)), vec![0.25; 35]);
        let up = upsample_bilinear(&[0.0, 1.0, 1.0, 0.0], (2, 2), (4, 4));
        assert_eq!((up[0], up[3], up[12], up[15]), (0.0, 1.0, 1.0, 0.0));
        assert!(up.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn render_modes() {
        let map = HeatMap {
            layer: "x".into(),
            grid_shape: (1, 2),
            grid: vec![0.0, 1.0],
            shape: (1, 2),
            upsampled: vec![0.5, 1.0],
        };
        let gray = render(&map, RenderMode::Gray);
        assert_eq!(&gray[gray.len() - 2..], &[128, 255]);
        let color = render(&map, RenderMode::Color);
        assert_eq!(&color[color.len() - 6..], &[0, 255, 0, 255, 0, 0]);
        assert_eq!("color".parse::<RenderMode>(), Ok(RenderMode::Color));
        assert!("jet".parse::<RenderMode>().is_err());
    }
}
