use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::dynsys::{GridShape, StateVector};
use crate::error::{Error, Result};

/// Channels per cell: RGB, alpha, then hidden state.
pub const CHANNELS: usize = 16;
pub const ALPHA: usize = 3;
/// A cell is alive when the 3x3 max-pooled alpha strictly exceeds this.
pub const ALIVE_THRESHOLD: f64 = 0.1;

/// `H x W x C` grid of cell states, row-major over (y, x, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct Substrate {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Substrate {
    pub fn zeros(height: usize, width: usize) -> Self {
        Substrate {
            height,
            width,
            data: vec![0.0; height * width * CHANNELS],
        }
    }

    pub fn from_flat(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: height * width * CHANNELS,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(Substrate {
            height,
            width,
            data,
        })
    }

    pub fn from_state(shape: GridShape, x: &StateVector) -> Result<Self> {
        if shape.channels != CHANNELS {
            return Err(Error::invalid(format!(
                "grid has {} channels, substrates have {CHANNELS}",
                shape.channels
            )));
        }
        Self::from_flat(shape.height, shape.width, x.as_slice().to_vec())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            height: self.height,
            width: self.width,
            channels: CHANNELS,
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn to_state(&self) -> StateVector {
        StateVector::from_finite(self.data.clone())
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * CHANNELS + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn cell(&self, y: usize, x: usize) -> &[f64] {
        let i = self.index(y, x, 0);
        &self.data[i..i + CHANNELS]
    }

    pub fn cell_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let i = self.index(y, x, 0);
        &mut self.data[i..i + CHANNELS]
    }

    /// Writes channels 0-3 as an RGBA PNG, clamped to `[0, 1]`.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut pixels = Vec::with_capacity(self.height * self.width * 4);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..4 {
                    let v = self.get(y, x, c).clamp(0.0, 1.0);
                    pixels.push((v * 255.0).round() as u8);
                }
            }
        }
        let file = BufWriter::new(File::create(path)?);
        let mut enc = png::Encoder::new(file, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }
}

/// Growing-NCA seed: a single live cell in the center with alpha and all hidden
/// channels set to one.
pub fn seed_state(height: usize, width: usize) -> Result<Substrate> {
    if height < 3 || width < 3 {
        return Err(Error::invalid("seed substrate must be at least 3x3"));
    }
    let mut s = Substrate::zeros(height, width);
    let (cy, cx) = (height / 2, width / 2);
    for c in ALPHA..CHANNELS {
        s.set(cy, cx, c, 1.0);
    }
    Ok(s)
}

/// Cells whose 3x3 neighborhood (clipped at the border) has alpha above
/// [`ALIVE_THRESHOLD`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LivingMask {
    height: usize,
    width: usize,
    alive: Vec<bool>,
}

impl LivingMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn is_alive(&self, y: usize, x: usize) -> bool {
        self.alive[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.alive
    }

    /// Inclusive `(y_min, x_min, y_max, x_max)` of living cells.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_alive(y, x) {
                    bbox = Some(match bbox {
                        None => (y, x, y, x),
                        Some((y0, x0, y1, x1)) => (y0.min(y), x0.min(x), y1.max(y), x1.max(x)),
                    });
                }
            }
        }
        bbox
    }

    pub fn and(&self, other: &LivingMask) -> LivingMask {
        LivingMask {
            height: self.height,
            width: self.width,
            alive: self
                .alive
                .iter()
                .zip(&other.alive)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }
}

pub fn living_mask(s: &Substrate) -> LivingMask {
    let (h, w) = (s.height, s.width);
    let mut alive = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut max_alpha = f64::NEG_INFINITY;
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    max_alpha = max_alpha.max(s.get(yy, xx, ALPHA));
                }
            }
            alive[y * w + x] = max_alpha > ALIVE_THRESHOLD;
        }
    }
    LivingMask {
        height: h,
        width: w,
        alive,
    }
}
