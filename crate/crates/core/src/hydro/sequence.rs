use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SEQUENCE_MAGIC: [u8; 2] = *b"DS";
pub const SEQUENCE_VERSION: u8 = 1;
pub const SEQUENCE_HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum SequenceIoError {
    #[error("IoFailure: {0}")]
    Io(#[from] std::io::Error),
    #[error("CorruptSequence: {0}")]
    Corrupt(String),
}

/// Radial density profiles at a sequence of snapshot times on a shared grid
/// r_k = k·dr, k = 0..points. Row `n` of `data` is snapshot `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySequence {
    pub points: usize,
    pub dr: f64,
    pub times: Vec<f64>,
    pub data: Vec<f64>,
}

impl DensitySequence {
    pub fn new(points: usize, dr: f64, times: Vec<f64>, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), points * times.len(), "density sequence shape");
        Self {
            points,
            dr,
            times,
            data,
        }
    }

    pub fn zeros_like(other: &DensitySequence) -> Self {
        Self::new(other.points, other.dr, other.times.clone(), vec![0.0; other.data.len()])
    }

    pub fn snapshots(&self) -> usize {
        self.times.len()
    }

    pub fn snapshot(&self, n: usize) -> &[f64] {
        &self.data[n * self.points..(n + 1) * self.points]
    }

    pub fn snapshot_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.points..(n + 1) * self.points]
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.points).map(|k| k as f64 * self.dr).collect()
    }

    /// Volumes of the dual shells [(k−½)dr, (k+½)dr] ∩ [0, ∞) owned by each point.
    pub fn cell_volumes(&self) -> Vec<f64> {
        cell_volumes(self.points, self.dr)
    }

    /// Spherical mass of snapshot `n`.
    pub fn mass(&self, n: usize) -> f64 {
        self.snapshot(n)
            .iter()
            .zip(self.cell_volumes())
            .map(|(rho, v)| rho * v)
            .sum()
    }

    pub fn same_grid(&self, other: &DensitySequence) -> bool {
        self.points == other.points
            && self.snapshots() == other.snapshots()
            && (self.dr - other.dr).abs() <= 1e-12 * self.dr.abs()
    }

    fn uniform_times(&self) -> Result<(f64, f64), SequenceIoError> {
        let t0 = self.times.first().copied().unwrap_or(0.0);
        let dt = if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        };
        for (k, t) in self.times.iter().enumerate() {
            if (t - (t0 + k as f64 * dt)).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(SequenceIoError::Corrupt("snapshot times are not uniform".into()));
            }
        }
        Ok((t0, dt))
    }

    /// Header (32 bytes, little-endian): magic "DS", version u8, snapshot count u8,
    /// point count u32, dr f64, t0 f64, dt f64. Then count·points f64 values.
    pub fn to_bytes(&self) -> Result<Vec<u8>, SequenceIoError> {
        let (t0, dt) = self.uniform_times()?;
        let count =
            u8::try_from(self.snapshots()).map_err(|_| SequenceIoError::Corrupt("more than 255 snapshots".into()))?;
        let points = u32::try_from(self.points).map_err(|_| SequenceIoError::Corrupt("too many grid points".into()))?;
        let mut out = Vec::with_capacity(SEQUENCE_HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(&SEQUENCE_MAGIC);
        out.push(SEQUENCE_VERSION);
        out.push(count);
        out.extend_from_slice(&points.to_le_bytes());
        out.extend_from_slice(&self.dr.to_le_bytes());
        out.extend_from_slice(&t0.to_le_bytes());
        out.extend_from_slice(&dt.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SequenceIoError> {
        if bytes.len() < SEQUENCE_HEADER_LEN {
            return Err(SequenceIoError::Corrupt("truncated header".into()));
        }
        if bytes[0..2] != SEQUENCE_MAGIC {
            return Err(SequenceIoError::Corrupt("bad magic".into()));
        }
        if bytes[2] != SEQUENCE_VERSION {
            return Err(SequenceIoError::Corrupt(format!("unsupported version {}", bytes[2])));
        }
        let count = bytes[3] as usize;
        let points = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let (dr, t0, dt) = (f(8), f(16), f(24));
        let expected = SEQUENCE_HEADER_LEN + 8 * count * points;
        if bytes.len() != expected {
            return Err(SequenceIoError::Corrupt(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let data = bytes[SEQUENCE_HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let times = (0..count).map(|k| t0 + k as f64 * dt).collect();
        Ok(Self::new(points, dr, times, data))
    }

    pub fn write_file(&self, path: &Path) -> Result<(), SequenceIoError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, SequenceIoError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn cell_volumes(points: usize, dr: f64) -> Vec<f64> {
    (0..points)
        .map(|k| {
            let lo = ((k as f64 - 0.5) * dr).max(0.0);
            let hi = (k as f64 + 0.5) * dr;
            4.0 * PI / 3.0 * (hi * hi * hi - lo * lo * lo)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_32_bytes() {
        let seq = DensitySequence::new(3, 0.5, vec![63.0, 63.5], vec![1.0; 6]);
        let bytes = seq.to_bytes().unwrap();
        assert_eq!(bytes.len(), 32 + 6 * 8);
        assert_eq!(&bytes[0..2], b"DS");
        assert_eq!(bytes[3], 2);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let seq = DensitySequence::new(3, 0.5, vec![63.0], vec![1.0; 3]);
        let bytes = seq.to_bytes().unwrap();
        assert!(DensitySequence::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn bytes_roundtrip(points in 1usize..40, count in 1usize..6, seed in proptest::collection::vec(-10.0f64..10.0, 240)) {
            let data: Vec<f64> = (0..points * count).map(|k| seed[k % seed.len()]).collect();
            let times = (0..count).map(|k| 63.0 + 0.5 * k as f64).collect();
            let seq = DensitySequence::new(points, 0.0246, times, data);
            let back = DensitySequence::from_bytes(&seq.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
