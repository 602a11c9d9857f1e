use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic bytes of the binary trajectory container.
pub const ATRJ_MAGIC: &[u8; 4] = b"ATRJ";
pub const ATRJ_VERSION: u32 = 1;

/// `T x D` matrix of consecutive states, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    data: Vec<f64>,
    dim: usize,
    t_start: i64,
    dt: f64,
}

impl Trajectory {
    /// Builds a trajectory from row-major data. Every entry must be finite and
    /// there must be at least one row.
    pub fn from_flat(data: Vec<f64>, dim: usize, t_start: i64, dt: f64) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::MalformedTrajectory(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedTrajectory(format!(
                "non-finite value in row {} column {}",
                i / dim,
                i % dim
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("trajectory dt must be positive"));
        }
        Ok(Trajectory {
            data,
            dim,
            t_start,
            dt,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::MalformedTrajectory("ragged rows".into()));
        }
        Self::from_flat(rows.concat(), dim, 0, 1.0)
    }

    pub fn with_t_start(mut self, t_start: i64) -> Self {
        self.t_start = t_start;
        self
    }

    /// Number of rows `T`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> i64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.data[j..].iter().step_by(self.dim).copied()
    }

    /// Absolute time of row `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.t_start as f64 + i as f64 * self.dt
    }

    /// The last `n` rows (all rows when `n >= len`).
    pub fn tail(&self, n: usize) -> Trajectory {
        let skip = self.len().saturating_sub(n);
        Trajectory {
            data: self.data[skip * self.dim..].to_vec(),
            dim: self.dim,
            t_start: self.t_start + (skip as f64 * self.dt).round() as i64,
            dt: self.dt,
        }
    }

    /// Vertical concatenation; time metadata comes from `self`.
    pub fn concat(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Trajectory { data, ..*self })
    }

    /// Per-column mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        let t = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= t);
        m
    }

    fn format_time(&self, i: usize) -> String {
        let t = self.time_of(i);
        if t.fract() == 0.0 && t.abs() < 1e15 {
            format!("{}", t as i64)
        } else {
            format!("{t}")
        }
    }

    /// CSV with header `t,x0,x1,...`. Floats use the shortest representation
    /// that round-trips.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for j in 0..self.dim {
            header.push_str(&format!(",x{j}"));
        }
        writeln!(w, "{header}")?;
        for (i, row) in self.rows().enumerate() {
            let mut line = self.format_time(i);
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Trajectory> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedTrajectory("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "t" {
            return Err(Error::MalformedTrajectory(format!(
                "expected header `t,x0,...`, got `{header}`"
            )));
        }
        let dim = cols.len() - 1;
        let mut data = Vec::new();
        let mut times = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::MalformedTrajectory(format!(
                    "line {} has {} fields, expected {}",
                    n + 2,
                    fields.len(),
                    dim + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::MalformedTrajectory(format!("bad number `{s}` on line {}", n + 2))
                })
            };
            times.push(parse(fields[0])?);
            for f in &fields[1..] {
                data.push(parse(f)?);
            }
        }
        let t_start = times.first().copied().unwrap_or(0.0).round() as i64;
        let dt = match times.as_slice() {
            [a, b, ..] if b > a => b - a,
            _ => 1.0,
        };
        Trajectory::from_flat(data, dim, t_start, dt)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    /// Binary container: magic `ATRJ`, version `u32`, `T` `u64`, `D` `u64`,
    /// then `T*D` little-endian `f64`, row-major.
    pub fn write_atrj<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(ATRJ_MAGIC)?;
        w.write_all(&ATRJ_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_atrj(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_atrj(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_atrj<R: Read>(mut r: R) -> Result<Trajectory> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != ATRJ_MAGIC {
            return Err(Error::MalformedTrajectory("bad ATRJ magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != ATRJ_VERSION {
            return Err(Error::MalformedTrajectory(format!(
                "unsupported ATRJ version {version}"
            )));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let t = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let d = u64::from_le_bytes(b8) as usize;
        let n = t
            .checked_mul(d)
            .ok_or_else(|| Error::MalformedTrajectory("ATRJ size overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * 8 {
            return Err(Error::MalformedTrajectory(format!(
                "ATRJ payload has {} bytes, expected {}",
                bytes.len(),
                n * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Trajectory::from_flat(data, d, 0, 1.0)
    }

    pub fn load_atrj(path: impl AsRef<Path>) -> Result<Trajectory> {
        Self::read_atrj(BufReader::new(File::open(path)?))
    }
}
