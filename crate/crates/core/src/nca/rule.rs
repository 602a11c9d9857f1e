use rayon::prelude::*;

use super::substrate::{Substrate, ALPHA, ALIVE_THRESHOLD, CHANNELS};
use super::weights::{RuleWeights, PERCEPTION_CHANNELS};
use crate::error::{Error, Result};

/// Sobel-x taps indexed `[dy + 1][dx + 1]`, before normalization.
pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
/// Transpose of [`SOBEL_X`].
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Perception of one cell: `[identity(C), sobel_x(C), sobel_y(C)]`, zero
/// padding outside the grid. Kernels are applied as cross-correlation.
#[inline]
fn perceive_cell(
    data: &[f64],
    height: usize,
    width: usize,
    y: usize,
    x: usize,
    kernel_norm: f64,
    out: &mut [f64; PERCEPTION_CHANNELS],
) {
    out.fill(0.0);
    let center = (y * width + x) * CHANNELS;
    out[..CHANNELS].copy_from_slice(&data[center..center + CHANNELS]);
    let (gx, gy) = out[CHANNELS..].split_at_mut(CHANNELS);
    for ky in 0..3 {
        let yy = y as isize + ky as isize - 1;
        if yy < 0 || yy >= height as isize {
            continue;
        }
        for kx in 0..3 {
            let xx = x as isize + kx as isize - 1;
            if xx < 0 || xx >= width as isize {
                continue;
            }
            let (wx, wy) = (SOBEL_X[ky][kx], SOBEL_Y[ky][kx]);
            let start = (yy as usize * width + xx as usize) * CHANNELS;
            let cell = &data[start..start + CHANNELS];
            for c in 0..CHANNELS {
                gx[c] += wx * cell[c];
                gy[c] += wy * cell[c];
            }
        }
    }
    for v in gx.iter_mut().chain(gy.iter_mut()) {
        *v /= kernel_norm;
    }
}

/// Depthwise identity/Sobel perception of the whole substrate, `H x W x 48`.
pub fn perceive(s: &Substrate, kernel_norm: f64) -> Vec<f64> {
    let (h, w) = (s.height(), s.width());
    let mut out = vec![0.0; h * w * PERCEPTION_CHANNELS];
    let mut p = [0.0; PERCEPTION_CHANNELS];
    for y in 0..h {
        for x in 0..w {
            perceive_cell(s.as_flat(), h, w, y, x, kernel_norm, &mut p);
            let i = (y * w + x) * PERCEPTION_CHANNELS;
            out[i..i + PERCEPTION_CHANNELS].copy_from_slice(&p);
        }
    }
    out
}

/// Update rule with weights upcast to `f64`.
#[derive(Debug, Clone)]
pub struct Rule {
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    kernel_norm: f64,
    /// Residual of a cell whose perception is all zeros.
    idle_delta: [f64; CHANNELS],
}

impl Rule {
    pub fn new(weights: &RuleWeights) -> Self {
        let up = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
        let mut rule = Rule {
            hidden: weights.hidden(),
            w1: up(weights.w1()),
            b1: up(weights.b1()),
            w2: up(weights.w2()),
            kernel_norm: weights.kernel_norm(),
            idle_delta: [0.0; CHANNELS],
        };
        let mut scratch = vec![0.0; rule.hidden];
        let mut idle = [0.0; CHANNELS];
        rule.residual(&[0.0; PERCEPTION_CHANNELS], &mut scratch, &mut idle);
        rule.idle_delta = idle;
        rule
    }

    /// `w2^T relu(w1^T p + b1)`.
    #[inline]
    fn residual(&self, p: &[f64; PERCEPTION_CHANNELS], hidden: &mut [f64], delta: &mut [f64; CHANNELS]) {
        hidden.copy_from_slice(&self.b1);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
            for (a, w) in hidden.iter_mut().zip(row) {
                *a += pi * w;
            }
        }
        delta.fill(0.0);
        for (j, &a) in hidden.iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            let row = &self.w2[j * CHANNELS..(j + 1) * CHANNELS];
            for (d, w) in delta.iter_mut().zip(row) {
                *d += a * w;
            }
        }
    }

    /// One deterministic update of a flat `H x W x 16` state into `out`.
    ///
    /// Every cell receives its residual; afterwards cells that are not alive
    /// both before and after the update are zeroed.
    pub fn apply(&self, height: usize, width: usize, input: &[f64], out: &mut [f64]) {
        let row_len = width * CHANNELS;
        let pre = alive_flags(input, height, width);
        out.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
            let mut p = [0.0; PERCEPTION_CHANNELS];
            let mut hidden = vec![0.0; self.hidden];
            let mut delta = [0.0; CHANNELS];
            for x in 0..width {
                perceive_cell(input, height, width, y, x, self.kernel_norm, &mut p);
                let d = if p.iter().all(|&v| v == 0.0) {
                    &self.idle_delta
                } else {
                    self.residual(&p, &mut hidden, &mut delta);
                    &delta
                };
                let cell = &mut row[x * CHANNELS..(x + 1) * CHANNELS];
                let src = &input[(y * width + x) * CHANNELS..][..CHANNELS];
                for c in 0..CHANNELS {
                    cell[c] = src[c] + d[c];
                }
            }
        });
        let post = alive_flags(out, height, width);
        for (i, cell) in out.chunks_exact_mut(CHANNELS).enumerate() {
            if !(pre[i] && post[i]) {
                cell.fill(0.0);
            }
        }
    }

    pub fn step(&self, s: &Substrate) -> Result<Substrate> {
        let mut out = vec![0.0; s.as_flat().len()];
        self.apply(s.height(), s.width(), s.as_flat(), &mut out);
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { step: 1, index });
        }
        Substrate::from_flat(s.height(), s.width(), out)
    }
}

fn alive_flags(data: &[f64], height: usize, width: usize) -> Vec<bool> {
    let alpha = |y: usize, x: usize| data[(y * width + x) * CHANNELS + ALPHA];
    let mut row_max = vec![f64::NEG_INFINITY; height * width];
    for y in 0..height {
        for x in 0..width {
            let mut m = alpha(y, x);
            if x > 0 {
                m = m.max(alpha(y, x - 1));
            }
            if x + 1 < width {
                m = m.max(alpha(y, x + 1));
            }
            row_max[y * width + x] = m;
        }
    }
    let mut alive = vec![false; height * width];
    for y in 0..height {
        for x in 0..width {
            let mut m = row_max[y * width + x];
            if y > 0 {
                m = m.max(row_max[(y - 1) * width + x]);
            }
            if y + 1 < height {
                m = m.max(row_max[(y + 1) * width + x]);
            }
            alive[y * width + x] = m > ALIVE_THRESHOLD;
        }
    }
    alive
}

/// One deterministic update with every cell updating.
pub fn nca_step(s: &Substrate, w: &RuleWeights) -> Result<Substrate> {
    Rule::new(w).step(s)
}
