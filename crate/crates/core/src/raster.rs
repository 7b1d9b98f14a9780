//! Single-channel image carrier and the separable resampler used throughout
//! the pipeline.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {height}x{width}")]
    Empty { height: usize, width: usize },
    #[error("raster data length {len} does not match {height}x{width}")]
    LengthMismatch {
        height: usize,
        width: usize,
        len: usize,
    },
}

/// Row-major image with values in `[0, 1]`.
///
/// The pipeline uses the ink convention: ink = 1, background = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::Empty { height, width });
        }
        if data.len() != height * width {
            return Err(RasterError::LengthMismatch {
                height,
                width,
                len: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// All-background raster. Panics on a zero dimension.
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be >= 1");
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut out = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                out.data[r * width + c] = f(r, c);
            }
        }
        out
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn ink_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Binarize: values `>= threshold` become 1, everything else 0.
    pub fn threshold(&self, threshold: f32) -> Raster {
        Raster {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Resample to `height x width`, independently per axis: area-average
    /// along an axis that shrinks, bilinear (pixel-centre aligned, clamped)
    /// along an axis that grows, identity along an axis that keeps its size.
    pub fn resize(&self, height: usize, width: usize) -> Raster {
        assert!(height > 0 && width > 0, "raster dimensions must be >= 1");
        if height == self.height && width == self.width {
            return self.clone();
        }
        let row_taps = axis_taps(self.height, height);
        let col_taps = axis_taps(self.width, width);

        // Columns first, into an intermediate self.height x width buffer.
        let mut tmp = vec![0f64; self.height * width];
        for r in 0..self.height {
            let src = self.row(r);
            let dst = &mut tmp[r * width..(r + 1) * width];
            for (d, taps) in dst.iter_mut().zip(&col_taps) {
                *d = taps.iter().map(|&(i, w)| w * src[i] as f64).sum();
            }
        }
        let mut data = vec![0f32; height * width];
        for (r, taps) in row_taps.iter().enumerate() {
            let dst = &mut data[r * width..(r + 1) * width];
            for (c, d) in dst.iter_mut().enumerate() {
                let v: f64 = taps.iter().map(|&(i, w)| w * tmp[i * width + c]).sum();
                *d = v.clamp(0.0, 1.0) as f32;
            }
        }
        Raster {
            height,
            width,
            data,
        }
    }
}

/// Per-output-index list of `(input index, weight)` pairs along one axis.
fn axis_taps(input: usize, output: usize) -> Vec<Vec<(usize, f64)>> {
    use std::cmp::Ordering;
    match output.cmp(&input) {
        Ordering::Equal => (0..output).map(|i| vec![(i, 1.0)]).collect(),
        Ordering::Less => {
            let scale = input as f64 / output as f64;
            (0..output)
                .map(|i| {
                    let lo = i as f64 * scale;
                    let hi = (i + 1) as f64 * scale;
                    let first = lo.floor() as usize;
                    let last = (hi.ceil() as usize).min(input);
                    (first..last)
                        .filter_map(|p| {
                            let overlap = (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0);
                            (overlap > 0.0).then_some((p, overlap / scale))
                        })
                        .collect()
                })
                .collect()
        }
        Ordering::Greater => {
            let scale = input as f64 / output as f64;
            (0..output)
                .map(|i| {
                    let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
                    let p0 = src.floor() as usize;
                    let frac = src - p0 as f64;
                    if p0 + 1 < input && frac > 0.0 {
                        vec![(p0, 1.0 - frac), (p0 + 1, frac)]
                    } else {
                        vec![(p0, 1.0)]
                    }
                })
                .collect()
        }
    }
}

/// Sample with bilinear interpolation at fractional `(row, col)`; pixels
/// outside the raster read as 0.
pub(crate) fn sample_bilinear_zero(raster: &Raster, row: f64, col: f64) -> f64 {
    let r0 = row.floor();
    let c0 = col.floor();
    let fr = row - r0;
    let fc = col - c0;
    let (r0, c0) = (r0 as i64, c0 as i64);
    let h = raster.height as i64;
    let w = raster.width as i64;
    let at = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= h || c >= w {
            0.0
        } else {
            raster.data[(r * w + c) as usize] as f64
        }
    };
    let top = at(r0, c0) * (1.0 - fc) + at(r0, c0 + 1) * fc;
    let bottom = at(r0 + 1, c0) * (1.0 - fc) + at(r0 + 1, c0 + 1) * fc;
    top * (1.0 - fr) + bottom * fr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(Raster::new(0, 3, vec![]), Err(RasterError::Empty { .. })));
        assert!(matches!(
            Raster::new(2, 2, vec![0.0; 3]),
            Err(RasterError::LengthMismatch { len: 3, .. })
        ));
    }

    #[test]
    fn area_downsample_averages_blocks() {
        let r = Raster::new(2, 4, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
        let s = r.resize(1, 2);
        assert_eq!(s.data(), &[1.0, 0.25]);
    }

    #[test]
    fn non_integer_area_weights_sum_to_one() {
        for (i, o) in [(256, 28), (10, 3), (7, 5)] {
            for taps in axis_taps(i, o) {
                let s: f64 = taps.iter().map(|t| t.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bilinear_upsample_of_constant_is_constant() {
        let r = Raster::new(2, 2, vec![0.5; 4]).unwrap();
        let u = r.resize(5, 7);
        assert!(u.data().iter().all(|&v| (v - 0.5).abs() < 1e-7));
    }

    #[test]
    fn threshold_is_inclusive() {
        let r = Raster::new(1, 3, vec![0.49, 0.5, 0.9]).unwrap();
        assert_eq!(r.threshold(0.5).data(), &[0.0, 1.0, 1.0]);
    }
}
