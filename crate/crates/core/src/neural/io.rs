//! Weight files and loss histories.
//!
//! Weight file layout, all integers little-endian:
//!
//! ```text
//! "HRNW" | u32 version | u32 header length | JSON header | f64 data ...
//! ```
//!
//! The header lists every tensor shape in storage order; the data section
//! is the concatenation of those tensors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::autodiff::Tensor;
use super::data::{Conditioning, GridMeta, Normalization};
use super::nets::{ConvSpec, MlpSpec};
use super::{GanConfig, NeuralError};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"HRNW";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    Mlp(MlpSpec),
    Conv(ConvSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsHeader {
    /// Model family, e.g. "cwgan".
    pub kind: String,
    /// Networks in storage order with their roles.
    pub networks: Vec<(String, Architecture)>,
    pub config: GanConfig,
    pub normalization: Normalization,
    pub grid: GridMeta,
    /// Standardization of the conditioning at the network inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<Conditioning>,
    /// Extra scalars a model needs (noise width, known mass, ...).
    pub scalars: Vec<(String, f64)>,
    pub shapes: Vec<Vec<usize>>,
}

impl WeightsHeader {
    pub fn scalar(&self, name: &str) -> Result<f64, NeuralError> {
        self.scalars
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| NeuralError::Parse(format!("weights header lacks scalar {name}")))
    }
}

pub fn weights_to_bytes(header: &WeightsHeader, tensors: &[&Tensor]) -> Result<Vec<u8>, NeuralError> {
    if header.shapes.len() != tensors.len() || header.shapes.iter().zip(tensors).any(|(s, t)| *s != t.shape) {
        return Err(NeuralError::ShapeMismatch("header shapes do not match tensors".into()));
    }
    let json = serde_json::to_vec(header)?;
    let total: usize = tensors.iter().map(|t| t.len()).sum();
    let mut out = Vec::with_capacity(12 + json.len() + 8 * total);
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<(WeightsHeader, Vec<Tensor>), NeuralError> {
    let bad = |m: &str| NeuralError::Parse(format!("weights file: {m}"));
    if bytes.len() < 12 || bytes[..4] != WEIGHTS_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != WEIGHTS_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: WeightsHeader = serde_json::from_slice(body)?;
    let mut at = 12 + hlen;
    let mut tensors = Vec::with_capacity(header.shapes.len());
    for shape in &header.shapes {
        let n: usize = shape.iter().product();
        let chunk = bytes.get(at..at + 8 * n).ok_or_else(|| bad("truncated data"))?;
        let data = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor::new(shape.clone(), data)?);
        at += 8 * n;
    }
    if at != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((header, tensors))
}

pub fn write_weights(path: &Path, header: &WeightsHeader, tensors: &[&Tensor]) -> Result<(), NeuralError> {
    fs::write(path, weights_to_bytes(header, tensors)?)?;
    Ok(())
}

pub fn read_weights(path: &Path) -> Result<(WeightsHeader, Vec<Tensor>), NeuralError> {
    weights_from_bytes(&fs::read(path)?)
}

/// Per-epoch loss values as (epoch, term, value) rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub rows: Vec<(usize, String, f64)>,
}

impl LossHistory {
    pub fn push(&mut self, epoch: usize, term: &str, value: f64) {
        self.rows.push((epoch, term.to_string(), value));
    }

    /// Term names in first-seen order.
    pub fn terms(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, t, _) in &self.rows {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    pub fn series(&self, term: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|(_, t, _)| t == term)
            .map(|(e, _, v)| (*e, *v))
            .collect()
    }

    pub fn last(&self, term: &str) -> Option<f64> {
        self.rows.iter().rev().find(|(_, t, _)| t == term).map(|(_, _, v)| *v)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,term,value\n");
        for (e, t, v) in &self.rows {
            // {:?} prints the shortest representation that round-trips.
            writeln!(s, "{e},{t},{v:?}").unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, NeuralError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("epoch,term,value") {
            return Err(NeuralError::Parse("loss CSV header must be epoch,term,value".into()));
        }
        let mut out = Self::default();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let err = || NeuralError::Parse(format!("loss CSV line {}: {line}", k + 2));
            if parts.len() != 3 {
                return Err(err());
            }
            let epoch = parts[0].parse().map_err(|_| err())?;
            let value = parts[2].parse().map_err(|_| err())?;
            out.rows.push((epoch, parts[1].to_string(), value));
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, NeuralError> {
        Self::from_csv(&fs::read_to_string(path)?)
    }
}
