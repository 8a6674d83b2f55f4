use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::database::SimulationRecord;
use crate::features::FeatureSet;
use crate::hydro::{cell_volumes, DensitySequence};

/// Scales applied before data enters a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    /// Density scale [g/cm³].
    pub rho_ref: f64,
    /// Feature scale [cm].
    pub r_domain_cm: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            rho_ref: 7.896,
            r_domain_cm: 16.0,
        }
    }
}

/// Per-column shift and scale applied to feature rows where they enter the
/// generator and the critic. Targets and stored features keep the plain
/// normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conditioning {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Conditioning {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    /// Column means and standard deviations of rows `c` [n, width]. Constant
    /// columns keep unit scale.
    pub fn fit(c: &[f64], width: usize) -> Self {
        let n = (c.len() / width.max(1)).max(1) as f64;
        let mut out = Self::identity(width);
        for j in 0..width {
            let col = c.iter().skip(j).step_by(width);
            let mean = col.clone().sum::<f64>() / n;
            let sd = (col.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            out.mean[j] = mean;
            if sd > 1e-9 * (1.0 + mean.abs()) {
                out.scale[j] = sd;
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let w = self.width();
        c.iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % w]) / self.scale[i % w])
            .collect()
    }
}

/// Grid of the density sequences a network produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeta {
    pub points: usize,
    pub dr: f64,
    pub times_us: Vec<f64>,
}

impl GridMeta {
    pub fn of(seq: &DensitySequence) -> Self {
        Self {
            points: seq.points,
            dr: seq.dr,
            times_us: seq.times.clone(),
        }
    }

    pub fn width(&self) -> usize {
        self.points * self.times_us.len()
    }

    pub fn feature_width(&self) -> usize {
        2 * self.times_us.len()
    }

    /// [width, snapshots] matrix mapping a normalized sequence row to masses
    /// divided by `mass`.
    pub fn mass_operator(&self, rho_ref: f64, mass: f64) -> Vec<f64> {
        let nt = self.times_us.len();
        let dv = cell_volumes(self.points, self.dr);
        let mut w = vec![0.0; self.width() * nt];
        for n in 0..nt {
            for (i, v) in dv.iter().enumerate() {
                w[(n * self.points + i) * nt + n] = rho_ref * v / mass;
            }
        }
        w
    }
}

/// Normalized (density, feature) pairs, one row per record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub grid: GridMeta,
    pub norm: Normalization,
    /// Row-major [len, grid.width()].
    pub x: Vec<f64>,
    /// Row-major [len, grid.feature_width()].
    pub c: Vec<f64>,
    /// Database index of each row.
    pub source: Vec<usize>,
}

impl TrainingSet {
    pub fn from_records(records: &[SimulationRecord], norm: Normalization) -> Result<Self, NeuralError> {
        let first = records.first().ok_or(NeuralError::EmptyDatabase)?;
        let grid = GridMeta::of(&first.sequence);
        let mut x = Vec::with_capacity(records.len() * grid.width());
        let mut c = Vec::with_capacity(records.len() * grid.feature_width());
        for r in records {
            if !r.sequence.same_grid(&first.sequence) {
                return Err(NeuralError::ShapeMismatch(format!(
                    "record {} is on a different grid",
                    r.index
                )));
            }
            if r.features.len() != grid.times_us.len() {
                return Err(NeuralError::MissingFeatures(r.index));
            }
            x.extend(norm.density_row(&r.sequence));
            c.extend(norm.feature_row(&r.features));
        }
        Ok(Self {
            grid,
            norm,
            x,
            c,
            source: records.iter().map(|r| r.index).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn x_row(&self, k: usize) -> &[f64] {
        let w = self.grid.width();
        &self.x[k * w..(k + 1) * w]
    }

    pub fn c_row(&self, k: usize) -> &[f64] {
        let w = self.grid.feature_width();
        &self.c[k * w..(k + 1) * w]
    }

    /// Stacks the rows `idx` into ([b, width], [b, feature_width]).
    pub fn batch(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.grid.width());
        let mut c = Vec::with_capacity(idx.len() * self.grid.feature_width());
        for &k in idx {
            x.extend_from_slice(self.x_row(k));
            c.extend_from_slice(self.c_row(k));
        }
        (x, c)
    }
}

impl Normalization {
    pub fn density_row(&self, seq: &DensitySequence) -> Vec<f64> {
        seq.data.iter().map(|v| v / self.rho_ref).collect()
    }

    pub fn feature_row(&self, f: &FeatureSet) -> Vec<f64> {
        f.flatten().iter().map(|v| v / self.r_domain_cm).collect()
    }

    pub fn density_from_row(&self, grid: &GridMeta, row: &[f64]) -> DensitySequence {
        DensitySequence::new(
            grid.points,
            grid.dr,
            grid.times_us.clone(),
            row.iter().map(|v| v * self.rho_ref).collect(),
        )
    }

    pub fn features_from_row(&self, grid: &GridMeta, row: &[f64]) -> FeatureSet {
        let flat: Vec<f64> = row.iter().map(|v| v * self.r_domain_cm).collect();
        FeatureSet::from_flat(grid.times_us.clone(), &flat)
    }
}
