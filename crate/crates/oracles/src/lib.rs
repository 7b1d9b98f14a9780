//! Straight-from-the-definition reference implementations in `f64`. Nothing
//! in the reference math shares code with the production crates; [`gradcheck`]
//! only adapts network descriptors and parameters onto [`RefNet`].

pub mod gradcheck;

/// Cross-correlation of a `C x H x W` input with `O x C x k x k` weights.
/// Returns the output and its `[O, OH, OW]` shape.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    [c, h, w]: [usize; 3],
    weight: &[f64],
    bias: &[f64],
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, [usize; 3]) {
    let o = bias.len();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0f64; o * oh * ow];
    for oc in 0..o {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = bias[oc];
                for ic in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * stride + ky) as isize - pad as isize;
                            let xx = (ox * stride + kx) as isize - pad as isize;
                            if y < 0 || xx < 0 || y as usize >= h || xx as usize >= w {
                                continue;
                            }
                            s += weight[((oc * c + ic) * k + ky) * k + kx]
                                * x[(ic * h + y as usize) * w + xx as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = s;
            }
        }
    }
    (out, [o, oh, ow])
}

/// Max pooling with floor output size. Returns values, the flat input index
/// of each maximum (first in row-major window order on ties) and the shape.
pub fn maxpool(x: &[f64], [c, h, w]: [usize; 3], window: usize, stride: usize) -> (Vec<f64>, Vec<usize>, [usize; 3]) {
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0;
                for dy in 0..window {
                    for dx in 0..window {
                        let i = (ch * h + oy * stride + dy) * w + ox * stride + dx;
                        if x[i] > best {
                            best = x[i];
                            at = i;
                        }
                    }
                }
                out.push(best);
                arg.push(at);
            }
        }
    }
    (out, arg, [c, oh, ow])
}

/// `y[u] = b[u] + sum_d w[u, d] x[d]`.
pub fn inner_product(x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let d = x.len();
    bias.iter()
        .enumerate()
        .map(|(u, &b)| b + (0..d).map(|i| weight[u * d + i] * x[i]).sum::<f64>())
        .collect()
}

/// `-ln softmax(logits)[label]`, via log-sum-exp.
pub fn softmax_loss(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefLayer {
    Conv { out: usize, k: usize, stride: usize, pad: usize },
    Pool { window: usize, stride: usize },
    Ip { out: usize },
    Relu,
    Softmax,
}

/// A plain sequential network. Parametric layers take `(weight, bias)` pairs
/// from the parameter list in order.
#[derive(Debug, Clone)]
pub struct RefNet {
    pub input: [usize; 3],
    pub layers: Vec<RefLayer>,
}

/// Loss plus the discrete choices made on the way (ReLU signs and pooling
/// winners); finite differences are only meaningful when these stay fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct RefTrace {
    pub loss: f64,
    pub pattern: Vec<usize>,
}

impl RefNet {
    /// Batch-mean softmax loss.
    pub fn loss(&self, params: &[(Vec<f64>, Vec<f64>)], inputs: &[Vec<f64>], labels: &[usize]) -> RefTrace {
        let mut total = 0.0;
        let mut pattern = Vec::new();
        for (x, &label) in inputs.iter().zip(labels) {
            let mut v = x.clone();
            let mut shape = self.input;
            let mut p = params.iter();
            for layer in &self.layers {
                match *layer {
                    RefLayer::Conv { k, stride, pad, .. } => {
                        let (w, b) = p.next().expect("conv params");
                        let (y, s) = conv2d(&v, shape, w, b, k, stride, pad);
                        v = y;
                        shape = s;
                    }
                    RefLayer::Pool { window, stride } => {
                        let (y, arg, s) = maxpool(&v, shape, window, stride);
                        pattern.extend(arg);
                        v = y;
                        shape = s;
                    }
                    RefLayer::Ip { out } => {
                        let (w, b) = p.next().expect("ip params");
                        v = inner_product(&v, w, b);
                        shape = [out, 1, 1];
                    }
                    RefLayer::Relu => {
                        pattern.extend(v.iter().map(|&a| usize::from(a > 0.0)));
                        v.iter_mut().for_each(|a| *a = a.max(0.0));
                    }
                    RefLayer::Softmax => total += softmax_loss(&v, label),
                }
            }
        }
        RefTrace {
            loss: total / inputs.len() as f64,
            pattern,
        }
    }
}

/// Central difference `(f(x + eps) - f(x - eps)) / 2 eps`.
pub fn central_difference(eps: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(eps) - f(-eps)) / (2.0 * eps)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Binary dilation by a `(2r+1)^2` square: a pixel is ink when any ink pixel
/// lies within Chebyshev distance `r`.
pub fn dilate(grid: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            'search: for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    if grid[yy * w + xx] {
                        out[y * w + x] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

/// Per-cell `sum_c |a_c|` of a `C x H x W` map, min-max normalized to
/// `[0, 1]` (constant maps become zero).
pub fn heat_aggregate(a: &[f64], [c, h, w]: [usize; 3]) -> Vec<f64> {
    let cells: Vec<f64> = (0..h * w)
        .map(|i| (0..c).map(|ch| a[ch * h * w + i].abs()).sum())
        .collect();
    let lo = cells.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    cells
        .iter()
        .map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}
