//! Straightforward per-pixel NCA step used as a reference implementation.
//!
//! Everything is spelled out with explicit loops and index arithmetic; the
//! Sobel taps are generated from their closed form rather than a table.

#![allow(dead_code)]

const C: usize = 16;
const ALPHA: usize = 3;

/// Sobel-x tap for offset `(dy, dx)`: `dx * (2 - |dy|)`.
fn sobel_x(dy: i64, dx: i64) -> f64 {
    (dx * (2 - dy.abs())) as f64
}

fn sobel_y(dy: i64, dx: i64) -> f64 {
    (dy * (2 - dx.abs())) as f64
}

fn at(state: &[f64], h: usize, w: usize, y: i64, x: i64, c: usize) -> f64 {
    if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
        0.0
    } else {
        state[(y as usize * w + x as usize) * C + c]
    }
}

fn alive(state: &[f64], h: usize, w: usize, y: usize, x: usize) -> bool {
    let mut best = f64::NEG_INFINITY;
    for dy in -1..=1i64 {
        for dx in -1..=1i64 {
            let (yy, xx) = (y as i64 + dy, x as i64 + dx);
            if yy >= 0 && xx >= 0 && yy < h as i64 && xx < w as i64 {
                best = best.max(at(state, h, w, yy, xx, ALPHA));
            }
        }
    }
    best > 0.1
}

/// One deterministic step. `w1` is `[48, hidden]`, `b1` is `[hidden]` and
/// `w2` is `[hidden, 16]`, all row-major.
pub fn naive_step(
    h: usize,
    w: usize,
    state: &[f64],
    w1: &[f32],
    b1: &[f32],
    w2: &[f32],
    hidden: usize,
    kernel_norm: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; state.len()];
    for y in 0..h {
        for x in 0..w {
            let mut p = vec![0.0; 3 * C];
            for c in 0..C {
                p[c] = at(state, h, w, y as i64, x as i64, c);
                let (mut gx, mut gy) = (0.0, 0.0);
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let v = at(state, h, w, y as i64 + dy, x as i64 + dx, c);
                        gx += sobel_x(dy, dx) * v;
                        gy += sobel_y(dy, dx) * v;
                    }
                }
                p[C + c] = gx / kernel_norm;
                p[2 * C + c] = gy / kernel_norm;
            }
            let mut a = vec![0.0; hidden];
            for j in 0..hidden {
                let mut s = b1[j] as f64;
                for (i, pi) in p.iter().enumerate() {
                    s += pi * w1[i * hidden + j] as f64;
                }
                a[j] = s.max(0.0);
            }
            for c in 0..C {
                let mut d = 0.0;
                for j in 0..hidden {
                    d += a[j] * w2[j * C + c] as f64;
                }
                out[(y * w + x) * C + c] = state[(y * w + x) * C + c] + d;
            }
        }
    }
    // Both masks are taken before any cell is zeroed.
    let keep: Vec<bool> = (0..h * w)
        .map(|i| alive(state, h, w, i / w, i % w) && alive(&out, h, w, i / w, i % w))
        .collect();
    for (i, cell) in out.chunks_exact_mut(C).enumerate() {
        if !keep[i] {
            cell.fill(0.0);
        }
    }
    out
}
