//! Dual coordinate descent for one binary L1-loss (hinge) SVM.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row-major samples, already normalized and augmented with a trailing 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    dim: usize,
    rows: Vec<f64>,
}

impl Design {
    /// Each row is optionally L2-normalized, then extended by a constant 1.
    pub fn new(dim: usize, values: &[f32], normalize: bool) -> Self {
        let n = values.len().checked_div(dim).unwrap_or(0);
        let mut rows = Vec::with_capacity(n * (dim + 1));
        for x in values.chunks_exact(dim.max(1)).take(n) {
            let norm = if normalize {
                x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
            } else {
                0.0
            };
            let norm = if norm > 0.0 { norm } else { 1.0 };
            rows.extend(x.iter().map(|&v| f64::from(v) / norm));
            rows.push(1.0);
        }
        Self { dim: dim + 1, rows }
    }

    /// Width including the bias column.
    pub fn width(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// `w = sum_i alpha_i y_i x_i`.
pub fn primal_weights(design: &Design, y: &[f64], alpha: &[f64]) -> Vec<f64> {
    let mut w = vec![0f64; design.width()];
    for (i, (&a, &yi)) in alpha.iter().zip(y).enumerate() {
        if a != 0.0 {
            for (wj, &xj) in w.iter_mut().zip(design.row(i)) {
                *wj += a * yi * xj;
            }
        }
    }
    w
}

/// `sum_i alpha_i - 1/2 |w(alpha)|^2`.
pub fn dual_objective(design: &Design, y: &[f64], alpha: &[f64]) -> f64 {
    let w = primal_weights(design, y, alpha);
    alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

/// `1/2 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)`.
pub fn primal_objective(design: &Design, y: &[f64], w: &[f64], c: f64) -> f64 {
    let hinge: f64 = (0..design.len())
        .map(|i| (1.0 - y[i] * dot(w, design.row(i))).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    /// Weights over the augmented features; the last entry is the bias.
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Dual objective at the start and after every sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Maximize the dual `sum a_i - 1/2 |sum a_i y_i x_i|^2` over `0 <= a_i <= c`
/// one coordinate at a time, visiting coordinates in a fresh seeded order each
/// sweep.
///
/// Coordinates stuck at a bound whose gradient lies beyond the previous
/// sweep's extreme projected gradients are dropped from later sweeps. Once
/// the remaining ones satisfy the tolerance, a sweep over every coordinate
/// decides: the solver stops only when that full sweep sees every projected
/// gradient below `tol`.
pub fn train_binary(design: &Design, y: &[f64], c: f64, tol: f64, max_sweeps: usize, seed: u64) -> BinarySolution {
    let n = design.len();
    let mut alpha = vec![0f64; n];
    let mut w = vec![0f64; design.width()];
    let diag: Vec<f64> = (0..n).map(|i| dot(design.row(i), design.row(i))).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = vec![0.0];
    let mut sweeps = 0;
    let mut converged = false;
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);

    while sweeps < max_sweeps {
        active.shuffle(&mut rng);
        let full = active.len() == n;
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut worst = 0f64;
        active.retain(|&i| {
            let x = design.row(i);
            let g = y[i] * dot(&w, x) - 1.0;
            let pg = if alpha[i] == 0.0 {
                if g > upper {
                    return false;
                }
                g.min(0.0)
            } else if alpha[i] == c {
                if g < lower {
                    return false;
                }
                g.max(0.0)
            } else {
                g
            };
            hi = hi.max(pg);
            lo = lo.min(pg);
            worst = worst.max(pg.abs());
            if pg != 0.0 && diag[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj += step * xj;
                    }
                }
            }
            true
        });
        sweeps += 1;
        trace.push(alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w));
        if worst < tol {
            if full && active.len() == n {
                converged = true;
                break;
            }
            active = (0..n).collect();
            (upper, lower) = (f64::INFINITY, f64::NEG_INFINITY);
            continue;
        }
        upper = if hi > 0.0 { hi } else { f64::INFINITY };
        lower = if lo < 0.0 { lo } else { f64::NEG_INFINITY };
    }
    BinarySolution {
        w,
        alpha,
        trace,
        sweeps,
        converged,
    }
}
