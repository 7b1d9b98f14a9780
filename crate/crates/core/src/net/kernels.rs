//! Layer primitives. Values are stored as `f32`; products are formed and
//! summed in `f64`, and every output accumulates its terms in a fixed order,
//! so results are reproducible bit-for-bit regardless of blocking, batch size
//! or the SIMD width picked at run time.

use super::{NetError, Tensor};

pub(crate) fn widen(src: &[f32], dst: &mut Vec<f64>) {
    dst.clear();
    dst.extend(src.iter().map(|&v| f64::from(v)));
}

pub(crate) fn narrow(src: &[f64], dst: &mut [f32]) {
    for (d, &v) in dst.iter_mut().zip(src) {
        *d = v as f32;
    }
}

/// Transpose a row-major `rows x cols` matrix.
pub(crate) fn transpose(src: &[f64], rows: usize, cols: usize, dst: &mut Vec<f64>) {
    dst.clear();
    dst.resize(rows * cols, 0.0);
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// `c += a * b` for row-major `a: m x k`, `b: k x n`, `c: m x n`. Each entry of
/// `c` adds its `k` products one at a time in index order.
pub(crate) fn gemm_acc(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected above.
            return unsafe { gemm_avx512(m, n, k, a, b, c) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected above.
            return unsafe { gemm_avx2(m, n, k, a, b, c) };
        }
    }
    gemm_body(m, n, k, a, b, c);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn gemm_avx512(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_body(m, n, k, a, b, c);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_avx2(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_body(m, n, k, a, b, c);
}

#[inline(always)]
fn gemm_body(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    let mut j = 0;
    while j < n {
        let step = match n - j {
            w if w >= 16 => column_panel::<16>(m, n, k, j, a, b, c),
            w if w >= 8 => column_panel::<8>(m, n, k, j, a, b, c),
            w if w >= 4 => column_panel::<4>(m, n, k, j, a, b, c),
            _ => column_panel::<1>(m, n, k, j, a, b, c),
        };
        j += step;
    }
}

#[inline(always)]
fn column_panel<const C: usize>(
    m: usize,
    n: usize,
    k: usize,
    j: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
) -> usize {
    let mut i = 0;
    while i + 4 <= m {
        tile::<4, C>(i, j, n, k, a, b, c);
        i += 4;
    }
    while i < m {
        tile::<1, C>(i, j, n, k, a, b, c);
        i += 1;
    }
    C
}

#[inline(always)]
fn tile<const R: usize, const C: usize>(
    i: usize,
    j: usize,
    n: usize,
    k: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
) {
    let mut t = [[0f64; C]; R];
    for (r, row) in t.iter_mut().enumerate() {
        row.copy_from_slice(&c[(i + r) * n + j..(i + r) * n + j + C]);
    }
    let rows: [&[f64]; R] = std::array::from_fn(|r| &a[(i + r) * k..(i + r + 1) * k]);
    for p in 0..k {
        let brow: &[f64; C] = b[p * n + j..p * n + j + C].try_into().expect("tile width");
        for (acc, arow) in t.iter_mut().zip(&rows) {
            let av = arow[p];
            for (x, &bv) in acc.iter_mut().zip(brow) {
                *x += av * bv;
            }
        }
    }
    for (r, row) in t.iter().enumerate() {
        c[(i + r) * n + j..(i + r) * n + j + C].copy_from_slice(row);
    }
}

/// Convolution geometry for one sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(input: [usize; 3], kernel: usize, stride: usize, pad: usize) -> Self {
        let [channels, height, width] = input;
        Self {
            channels,
            height,
            width,
            kernel,
            stride,
            pad,
            out_h: (height + 2 * pad - kernel) / stride + 1,
            out_w: (width + 2 * pad - kernel) / stride + 1,
        }
    }

    /// Rows of the unfolded input: `C * k * k`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfold the input into a `(C*k*k) x (out_h*out_w)` matrix; padding reads 0.
pub(crate) fn im2col(input: &[f32], g: &ConvGeom, cols: &mut Vec<f64>) {
    let n = g.positions();
    cols.clear();
    cols.resize(g.patch_len() * n, 0.0);
    for c in 0..g.channels {
        let plane = &input[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.out_h {
                    let y = (oy * g.stride + ki) as isize - g.pad as isize;
                    if y < 0 || y >= g.height as isize {
                        continue;
                    }
                    let src = &plane[y as usize * g.width..(y as usize + 1) * g.width];
                    for (ox, d) in dst[oy * g.out_w..(oy + 1) * g.out_w].iter_mut().enumerate() {
                        let x = (ox * g.stride + kj) as isize - g.pad as isize;
                        if x >= 0 && x < g.width as isize {
                            *d = f64::from(src[x as usize]);
                        }
                    }
                }
            }
        }
    }
}

/// Fold a `(C*k*k) x positions` matrix back onto the input layout, adding.
pub(crate) fn col2im_add(cols: &[f64], g: &ConvGeom, out: &mut [f64]) {
    let n = g.positions();
    for c in 0..g.channels {
        let plane = &mut out[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.out_h {
                    let y = (oy * g.stride + ki) as isize - g.pad as isize;
                    if y < 0 || y >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * g.width..(y as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let x = (ox * g.stride + kj) as isize - g.pad as isize;
                        if x >= 0 && x < g.width as isize {
                            dst[x as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Forward convolution of one sample with widened `O x (C*k*k)` weights.
pub(crate) fn conv_sample(
    input: &[f32],
    g: &ConvGeom,
    weight: &[f64],
    bias: &[f32],
    cols: &mut Vec<f64>,
    acc: &mut Vec<f64>,
    out: &mut [f32],
) {
    let n = g.positions();
    im2col(input, g, cols);
    acc.clear();
    for &b in bias {
        acc.extend(std::iter::repeat_n(f64::from(b), n));
    }
    gemm_acc(bias.len(), n, g.patch_len(), weight, cols, acc);
    narrow(acc, out);
}

/// Cross-correlation of a `C x H x W` input with `O x C x k x k` weights.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor, NetError> {
    let err = |detail: String| NetError::Shape {
        layer: "conv2d".into(),
        detail,
    };
    let &[c, h, w] = input.shape() else {
        return Err(err(format!("input must be C x H x W, got {:?}", input.shape())));
    };
    let &[o, wc, k, k2] = weights.shape() else {
        return Err(err(format!("weights must be O x C x k x k, got {:?}", weights.shape())));
    };
    if wc != c || k != k2 || bias.shape() != [o] || k == 0 || stride == 0 {
        return Err(err(format!(
            "incompatible input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    if h + 2 * pad < k || w + 2 * pad < k {
        return Err(err(format!("kernel {k} exceeds padded input")));
    }
    let g = ConvGeom::new([c, h, w], k, stride, pad);
    let mut out = Tensor::zeros(&[o, g.out_h, g.out_w]);
    let mut w64 = Vec::new();
    widen(weights.data(), &mut w64);
    conv_sample(
        input.data(),
        &g,
        &w64,
        bias.data(),
        &mut Vec::new(),
        &mut Vec::new(),
        out.data_mut(),
    );
    Ok(out)
}

/// Max pooling of one sample; `argmax` receives flat input indices, ties go
/// to the first element in row-major window order.
pub(crate) fn maxpool_sample(
    input: &[f32],
    shape: [usize; 3],
    window: usize,
    stride: usize,
    out: &mut [f32],
    argmax: &mut [u32],
) {
    let [c, h, w] = shape;
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_at = base + oy * stride * w + ox * stride;
                for dy in 0..window {
                    let row = base + (oy * stride + dy) * w + ox * stride;
                    for (dx, &v) in input[row..row + window].iter().enumerate() {
                        if v > best {
                            best = v;
                            best_at = row + dx;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_at as u32;
            }
        }
    }
}

pub fn maxpool_forward(
    input: &Tensor,
    window: usize,
    stride: usize,
) -> Result<(Tensor, Vec<u32>), NetError> {
    let &[c, h, w] = input.shape() else {
        return Err(NetError::Contract(format!(
            "max pool input must be C x H x W, got {:?}",
            input.shape()
        )));
    };
    if window == 0 || stride == 0 || window > h || window > w {
        return Err(NetError::Contract(format!(
            "pool window {window} (stride {stride}) does not fit input {h}x{w}"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0u32; c * oh * ow];
    maxpool_sample(input.data(), [c, h, w], window, stride, out.data_mut(), &mut argmax);
    Ok((out, argmax))
}

/// `out[b, u] = bias[u] + weight[u, :] . input[b, :]` for a batch. Small
/// batches skip the weight transpose; both paths add terms in the same order.
pub(crate) fn inner_product_batch(input: &[f32], batch: usize, weight: &[f32], bias: &[f32], out: &mut [f32]) {
    let units = bias.len();
    let dim = weight.len() / units;
    let mut x = Vec::new();
    widen(&input[..batch * dim], &mut x);
    if batch < 8 {
        for (xb, ob) in x.chunks_exact(dim).zip(out.chunks_exact_mut(units)) {
            for ((o, wrow), &b) in ob.iter_mut().zip(weight.chunks_exact(dim)).zip(bias) {
                let mut s = f64::from(b);
                for (&w, &v) in wrow.iter().zip(xb) {
                    s += f64::from(w) * v;
                }
                *o = s as f32;
            }
        }
        return;
    }
    let (mut w, mut wt) = (Vec::new(), Vec::new());
    widen(weight, &mut w);
    transpose(&w, units, dim, &mut wt);
    let mut acc: Vec<f64> = (0..batch).flat_map(|_| bias.iter().map(|&b| f64::from(b))).collect();
    gemm_acc(batch, units, dim, &x, &wt, &mut acc);
    narrow(&acc, out);
}

pub fn inner_product_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NetError> {
    let &[u, d] = weights.shape() else {
        return Err(NetError::Contract(format!(
            "inner product weights must be U x D, got {:?}",
            weights.shape()
        )));
    };
    if input.len() != d || bias.shape() != [u] {
        return Err(NetError::Contract(format!(
            "inner product expects {d} inputs and {u} biases, got {} and {:?}",
            input.len(),
            bias.shape()
        )));
    }
    let mut out = Tensor::zeros(&[u]);
    inner_product_batch(input.data(), 1, weights.data(), bias.data(), out.data_mut());
    Ok(out)
}

/// Max-subtracted softmax in `f64`; returns `(-ln p[label], p)`.
pub(crate) fn softmax_f64(logits: &[f32], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
    let exps: Vec<f64> = logits.iter().map(|&v| (f64::from(v) - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (f64::from(logits[label]) - max);
    (loss, exps.into_iter().map(|e| e / sum).collect())
}

/// Softmax probabilities in full `f64` precision.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    softmax_f64(logits, 0).1
}

/// Loss `-ln p[label]` and the probabilities rounded to `f32`; use
/// [`softmax`] for the unrounded values.
pub fn softmax_loss(logits: &Tensor, label: usize) -> Result<(f64, Tensor), NetError> {
    let k = logits.len();
    if k < 2 {
        return Err(NetError::Contract(format!("softmax needs >= 2 logits, got {k}")));
    }
    if label >= k {
        return Err(NetError::Contract(format!("label {label} out of range for {k} classes")));
    }
    let (loss, p) = softmax_f64(logits.data(), label);
    Ok((loss, Tensor::new(vec![k], p.into_iter().map(|v| v as f32).collect())?))
}
