//! Rule weights and the NCAW v1 weight file.
//!
//! Layout: one JSON object on the first line, a newline, then the tensors as
//! little-endian `f32`, row-major, in the order `w1` `[3C, hidden]`, `b1`
//! `[hidden]`, `w2` `[hidden, C]`. Header keys: `magic`, `version`, `C`,
//! `hidden`, `H`, `W`, `update_rate`, `kernel_norm` and an optional `tensors`
//! list of `{name, shape}` declaring the tensor order. Other keys (e.g. the
//! trainer's damage convention) are preserved as metadata.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::substrate::CHANNELS;
use crate::error::{Error, Result};
use crate::sampling::seeded_rng;

pub const NCAW_MAGIC: &str = "NCAW";
pub const NCAW_VERSION: u32 = 1;
/// Sobel kernels are divided by this.
pub const DEFAULT_KERNEL_NORM: f64 = 8.0;
pub const PERCEPTION_CHANNELS: usize = 3 * CHANNELS;
pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_GRID: usize = 72;

/// Parameters of the per-cell update rule: a dense layer with bias and ReLU
/// from the 48 perception features to `hidden` units, then a dense layer
/// without bias to the 16 channel deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleWeights {
    hidden: usize,
    w1: Vec<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    kernel_norm: f64,
    height: usize,
    width: usize,
    metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct TensorSpec {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    magic: String,
    version: u32,
    #[serde(rename = "C")]
    channels: usize,
    hidden: usize,
    #[serde(rename = "H")]
    height: usize,
    #[serde(rename = "W")]
    width: usize,
    update_rate: f64,
    kernel_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tensors: Option<Vec<TensorSpec>>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedWeights(msg.into())
}

impl RuleWeights {
    pub fn new(hidden: usize, w1: Vec<f32>, b1: Vec<f32>, w2: Vec<f32>) -> Result<Self> {
        if hidden == 0 {
            return Err(malformed("hidden width must be positive"));
        }
        let check = |name: &str, v: &[f32], len: usize| {
            if v.len() != len {
                return Err(malformed(format!("{name} has {} values, expected {len}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(malformed(format!("{name} contains non-finite values")));
            }
            Ok(())
        };
        check("w1", &w1, PERCEPTION_CHANNELS * hidden)?;
        check("b1", &b1, hidden)?;
        check("w2", &w2, hidden * CHANNELS)?;
        Ok(RuleWeights {
            hidden,
            w1,
            b1,
            w2,
            kernel_norm: DEFAULT_KERNEL_NORM,
            height: DEFAULT_GRID,
            width: DEFAULT_GRID,
            metadata: BTreeMap::new(),
        })
    }

    /// The do-nothing rule.
    pub fn zeros(hidden: usize) -> Self {
        Self::new(
            hidden,
            vec![0.0; PERCEPTION_CHANNELS * hidden],
            vec![0.0; hidden],
            vec![0.0; hidden * CHANNELS],
        )
        .expect("zero weights are valid")
    }

    /// Gaussian weights with standard deviation `scale`, seeded.
    pub fn random(hidden: usize, scale: f64, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut draw = |n: usize| -> Vec<f32> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (scale * z) as f32
                })
                .collect()
        };
        let w1 = draw(PERCEPTION_CHANNELS * hidden);
        let b1 = draw(hidden);
        let w2 = draw(hidden * CHANNELS);
        Self::new(hidden, w1, b1, w2).expect("finite random weights")
    }

    pub fn with_training_grid(mut self, height: usize, width: usize) -> Self {
        self.height = height;
        self.width = width;
        self
    }

    pub fn with_kernel_norm(mut self, kernel_norm: f64) -> Result<Self> {
        if !(kernel_norm.is_finite() && kernel_norm > 0.0) {
            return Err(malformed("kernel_norm must be positive"));
        }
        self.kernel_norm = kernel_norm;
        Ok(self)
    }

    pub fn with_metadata(mut self, key: &str, value: Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Row-major `[48][hidden]`.
    pub fn w1(&self) -> &[f32] {
        &self.w1
    }

    pub fn b1(&self) -> &[f32] {
        &self.b1
    }

    /// Row-major `[hidden][16]`.
    pub fn w2(&self) -> &[f32] {
        &self.w2
    }

    pub fn w2_mut(&mut self) -> &mut [f32] {
        &mut self.w2
    }

    pub fn kernel_norm(&self) -> f64 {
        self.kernel_norm
    }

    /// Substrate size the rule was trained on.
    pub fn training_grid(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn metadata(&self) -> &BTreeMap<String, Value> {
        &self.metadata
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            magic: NCAW_MAGIC.to_string(),
            version: NCAW_VERSION,
            channels: CHANNELS,
            hidden: self.hidden,
            height: self.height,
            width: self.width,
            update_rate: 1.0,
            kernel_norm: self.kernel_norm,
            tensors: Some(expected_tensors(self.hidden)),
            extra: self.metadata.clone(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for v in self.w1.iter().chain(&self.b1).chain(&self.w2) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut stream = serde_json::Deserializer::from_slice(bytes).into_iter::<Value>();
        let value = match stream.next() {
            Some(Ok(v)) => v,
            Some(Err(e)) => return Err(malformed(format!("bad header: {e}"))),
            None => return Err(malformed("empty file")),
        };
        let mut offset = stream.byte_offset();
        if bytes.get(offset) == Some(&b'\r') {
            offset += 1;
        }
        if bytes.get(offset) != Some(&b'\n') {
            return Err(malformed("header must be terminated by a newline"));
        }
        offset += 1;

        match value.get("magic").and_then(Value::as_str) {
            Some(NCAW_MAGIC) => {}
            _ => return Err(malformed("bad magic")),
        }
        if let Some(v) = value.get("version").and_then(Value::as_u64) {
            if v != NCAW_VERSION as u64 {
                return Err(Error::VersionMismatch {
                    found: v as u32,
                    expected: NCAW_VERSION,
                });
            }
        }
        let header: Header =
            serde_json::from_value(value).map_err(|e| malformed(format!("bad header: {e}")))?;
        if header.update_rate != 1.0 {
            return Err(Error::UnsupportedUpdateRate(header.update_rate));
        }
        if header.channels != CHANNELS {
            return Err(malformed(format!(
                "{} channels; only {CHANNELS}-channel rules are supported",
                header.channels
            )));
        }
        let hidden = header.hidden;
        if let Some(tensors) = &header.tensors {
            let expected = expected_tensors(hidden);
            if tensors != &expected {
                return Err(malformed(format!(
                    "tensor declaration {tensors:?} does not match expected {expected:?}"
                )));
            }
        }

        let payload = &bytes[offset..];
        let n = PERCEPTION_CHANNELS * hidden + hidden + hidden * CHANNELS;
        if payload.len() != 4 * n {
            return Err(malformed(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                4 * n
            )));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (w1, rest) = values.split_at(PERCEPTION_CHANNELS * hidden);
        let (b1, w2) = rest.split_at(hidden);
        let weights = RuleWeights::new(hidden, w1.to_vec(), b1.to_vec(), w2.to_vec())?;
        let mut weights = weights
            .with_training_grid(header.height, header.width)
            .with_kernel_norm(header.kernel_norm)?;
        weights.metadata = header.extra;
        Ok(weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn expected_tensors(hidden: usize) -> Vec<TensorSpec> {
    vec![
        TensorSpec {
            name: "w1".into(),
            shape: vec![PERCEPTION_CHANNELS, hidden],
        },
        TensorSpec {
            name: "b1".into(),
            shape: vec![hidden],
        },
        TensorSpec {
            name: "w2".into(),
            shape: vec![hidden, CHANNELS],
        },
    ]
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<RuleWeights> {
    RuleWeights::load(path)
}

pub fn save_weights(w: &RuleWeights, path: impl AsRef<Path>) -> Result<()> {
    w.save(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_header(w: &RuleWeights, edit: impl FnOnce(&mut Value)) -> Vec<u8> {
        let bytes = w.to_bytes();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let mut header: Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        edit(&mut header);
        let mut out = serde_json::to_vec(&header).unwrap();
        out.extend_from_slice(&bytes[nl..]);
        out
    }

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.ncaw");
        let w = RuleWeights::random(32, 0.1, 3)
            .with_training_grid(40, 40)
            .with_metadata("damage_radius", Value::from(8));
        save_weights(&w, &path).unwrap();
        let back = load_weights(&path).unwrap();
        assert_eq!(back, w);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.w1()), bits(w.w1()));
        assert_eq!(back.metadata()["damage_radius"], Value::from(8));
    }

    #[test]
    fn header_lists_documented_fields() {
        let bytes = RuleWeights::zeros(4).to_bytes();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        for key in ["magic", "version", "C", "hidden", "H", "W", "update_rate", "kernel_norm"] {
            assert!(header.get(key).is_some(), "missing {key}");
        }
        assert_eq!(header["kernel_norm"], Value::from(8.0));
        assert_eq!(bytes.len(), nl + 1 + 4 * (48 * 4 + 4 + 4 * 16));
    }

    #[test]
    fn wrong_w1_shape_is_malformed() {
        let w = RuleWeights::zeros(128);
        let bytes = with_header(&w, |h| {
            h["tensors"][0]["shape"] = serde_json::json!([47, 128]);
        });
        assert!(matches!(
            RuleWeights::from_bytes(&bytes),
            Err(Error::MalformedWeights(_))
        ));
    }

    #[test]
    fn half_update_rate_is_rejected() {
        let bytes = with_header(&RuleWeights::zeros(8), |h| h["update_rate"] = Value::from(0.5));
        assert!(matches!(
            RuleWeights::from_bytes(&bytes),
            Err(Error::UnsupportedUpdateRate(r)) if r == 0.5
        ));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let w = RuleWeights::zeros(8);
        let bytes = with_header(&w, |h| h["version"] = Value::from(2));
        assert!(matches!(
            RuleWeights::from_bytes(&bytes),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
        let bytes = with_header(&w, |h| h["magic"] = Value::from("NCAX"));
        assert!(matches!(
            RuleWeights::from_bytes(&bytes),
            Err(Error::MalformedWeights(_))
        ));
    }

    #[test]
    fn tensors_list_is_optional_and_payload_length_checked() {
        let w = RuleWeights::random(8, 0.2, 1);
        let bytes = with_header(&w, |h| {
            h.as_object_mut().unwrap().remove("tensors");
        });
        assert_eq!(RuleWeights::from_bytes(&bytes).unwrap(), w);
        let mut short = w.to_bytes();
        short.truncate(short.len() - 4);
        assert!(matches!(
            RuleWeights::from_bytes(&short),
            Err(Error::MalformedWeights(_))
        ));
    }
}
