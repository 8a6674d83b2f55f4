//! Projection of reconstructed density sequences onto the set of simulated
//! ones, plus shock-kinematics out-of-distribution diagnostics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::database::{GridIndex, SimulationRecord, TIE_TOL};
use crate::eos::EosParams;
use crate::features::FeatureSet;
use crate::hydro::{cell_volumes, DensitySequence};

/// Regularization added to the kinematics covariance before inversion.
pub const COVARIANCE_REG: f64 = 1e-12;
pub const INSIDE_LIMIT: f64 = 2.0;
pub const NEAR_LIMIT: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("GridMismatch: {0}")]
    GridMismatch(String),
    #[error("ZeroMass: snapshot {0} has no material")]
    ZeroMass(usize),
    #[error("EmptyDatabase")]
    EmptyDatabase,
    #[error("InsufficientSnapshots: need at least 3, got {0}")]
    InsufficientSnapshots(usize),
    #[error("DegenerateCloud: {0}")]
    DegenerateCloud(String),
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

fn check_grid(a: &DensitySequence, b: &DensitySequence) -> Result<()> {
    if !a.same_grid(b) {
        return Err(ManifoldError::GridMismatch(format!(
            "{}x{} (dr {}) vs {}x{} (dr {})",
            a.snapshots(),
            a.points,
            a.dr,
            b.snapshots(),
            b.points,
            b.dr
        )));
    }
    Ok(())
}

/// Volume-weighted RMS difference over all snapshots.
pub fn combined_l2(a: &DensitySequence, b: &DensitySequence) -> Result<f64> {
    check_grid(a, b)?;
    let vol = a.cell_volumes();
    let total: f64 = vol.iter().sum();
    let mut acc = 0.0;
    for n in 0..a.snapshots() {
        for ((x, y), v) in a.snapshot(n).iter().zip(b.snapshot(n)).zip(&vol) {
            acc += (x - y).powi(2) * v;
        }
    }
    Ok((acc / (a.snapshots() as f64 * total)).sqrt())
}

/// How per-snapshot transport distances are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Max,
    Rms,
}

fn normalized_cdf(rho: &[f64], vol: &[f64], snapshot: usize) -> Result<Vec<f64>> {
    let mut cdf = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    for (r, v) in rho.iter().zip(vol) {
        acc += (r * v).max(0.0);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(ManifoldError::ZeroMass(snapshot));
    }
    for c in &mut cdf {
        *c /= acc;
    }
    Ok(cdf)
}

/// W₁ between the normalized radial mass distributions of one snapshot pair,
/// treating each cell's mass as a point mass at its grid radius.
pub fn wasserstein_snapshot(a: &[f64], b: &[f64], dr: f64, snapshot: usize) -> Result<f64> {
    let vol = cell_volumes(a.len(), dr);
    let ca = normalized_cdf(a, &vol, snapshot)?;
    let cb = normalized_cdf(b, &vol, snapshot)?;
    let n = ca.len();
    Ok(ca[..n - 1]
        .iter()
        .zip(&cb[..n - 1])
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * dr)
}

pub fn wasserstein_1d_with(a: &DensitySequence, b: &DensitySequence, agg: Aggregate) -> Result<f64> {
    check_grid(a, b)?;
    let per: Vec<f64> = (0..a.snapshots())
        .map(|n| wasserstein_snapshot(a.snapshot(n), b.snapshot(n), a.dr, n))
        .collect::<Result<_>>()?;
    let m = per.len() as f64;
    Ok(match agg {
        Aggregate::Mean => per.iter().sum::<f64>() / m,
        Aggregate::Max => per.iter().copied().fold(0.0, f64::max),
        Aggregate::Rms => (per.iter().map(|w| w * w).sum::<f64>() / m).sqrt(),
    })
}

pub fn wasserstein_1d(a: &DensitySequence, b: &DensitySequence) -> Result<f64> {
    wasserstein_1d_with(a, b, Aggregate::Mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Wasserstein,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l2" => Ok(Metric::L2),
            "wasserstein" => Ok(Metric::Wasserstein),
            other => Err(format!("unknown metric '{other}' (expected l2 or wasserstein)")),
        }
    }
}

pub fn distance(metric: Metric, agg: Aggregate, a: &DensitySequence, b: &DensitySequence) -> Result<f64> {
    match metric {
        Metric::L2 => combined_l2(a, b),
        Metric::Wasserstein => wasserstein_1d_with(a, b, agg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub grid_index: GridIndex,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub metric: Metric,
    pub params: EosParams,
    pub index: usize,
    pub grid_index: GridIndex,
    pub projected: DensitySequence,
    /// Combined L2 distance between target and projection [g/cm³].
    pub residual: f64,
    /// All candidates, nearest first.
    pub table: Vec<Candidate>,
}

#[derive(Serialize)]
struct ProjectionJson<'a> {
    metric: Metric,
    params: &'a EosParams,
    index: usize,
    grid_index: GridIndex,
    residual_g_per_cc: f64,
    metric_value: f64,
    candidates: &'a [Candidate],
}

impl ProjectionResult {
    pub fn to_json(&self, top_k: usize) -> serde_json::Value {
        serde_json::to_value(ProjectionJson {
            metric: self.metric,
            params: &self.params,
            index: self.index,
            grid_index: self.grid_index,
            residual_g_per_cc: self.residual,
            metric_value: self.table[0].distance,
            candidates: &self.table[..top_k.min(self.table.len())],
        })
        .expect("projection serializes")
    }
}

/// Sorts by distance; distances equal up to round-off are ordered by grid index.
pub fn rank(mut table: Vec<Candidate>) -> Vec<Candidate> {
    table.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.grid_index.cmp(&b.grid_index)));
    let mut start = 0;
    while start < table.len() {
        let d0 = table[start].distance;
        let end = start
            + table[start..]
                .iter()
                .take_while(|c| c.distance - d0 <= TIE_TOL * (1.0 + d0))
                .count();
        table[start..end].sort_by_key(|a| a.grid_index);
        start = end;
    }
    table
}

/// Exhaustive argmin of `metric` over all records.
pub fn estimate_parameters(
    records: &[SimulationRecord],
    target: &DensitySequence,
    metric: Metric,
    agg: Aggregate,
) -> Result<ProjectionResult> {
    if records.is_empty() {
        return Err(ManifoldError::EmptyDatabase);
    }
    let table = records
        .iter()
        .map(|r| {
            Ok(Candidate {
                index: r.index,
                grid_index: r.grid_index,
                distance: distance(metric, agg, target, &r.sequence)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = rank(table);
    let best = records
        .iter()
        .find(|r| r.index == table[0].index)
        .expect("ranked candidate comes from the records");
    Ok(ProjectionResult {
        metric,
        params: best.params,
        index: best.index,
        grid_index: best.grid_index,
        projected: best.sequence.clone(),
        residual: combined_l2(target, &best.sequence)?,
        table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockKinematics {
    pub t0_us: f64,
    pub r0_cm: f64,
    pub v_cm_per_us: f64,
    pub a_cm_per_us2: f64,
    /// Root of the summed squared residuals [cm].
    pub residual_cm: f64,
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Least-squares r_s(t) = r₀ + v·τ + ½a·τ² with τ = t − t₀, t₀ the first snapshot time.
pub fn fit_shock_kinematics(features: &FeatureSet) -> Result<ShockKinematics> {
    let n = features.len();
    if n < 3 || features.shock_cm.len() != n {
        return Err(ManifoldError::InsufficientSnapshots(n));
    }
    let t0 = features.times_us[0];
    let basis = |t: f64| {
        let tau = t - t0;
        [1.0, tau, 0.5 * tau * tau]
    };
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (t, r) in features.times_us.iter().zip(&features.shock_cm) {
        let b = basis(*t);
        for i in 0..3 {
            rhs[i] += b[i] * r;
            for j in 0..3 {
                m[i][j] += b[i] * b[j];
            }
        }
    }
    let x = solve3(m, rhs).ok_or(ManifoldError::InsufficientSnapshots(n))?;
    let ss: f64 = features
        .times_us
        .iter()
        .zip(&features.shock_cm)
        .map(|(t, r)| {
            let b = basis(*t);
            (r - (x[0] * b[0] + x[1] * b[1] + x[2] * b[2])).powi(2)
        })
        .sum();
    Ok(ShockKinematics {
        t0_us: t0,
        r0_cm: x[0],
        v_cm_per_us: x[1],
        a_cm_per_us2: x[2],
        residual_cm: ss.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Inside,
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodScore {
    pub mahalanobis: f64,
    pub verdict: Verdict,
}

/// Mean and inverse covariance of the database (v, a) point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicsCloud {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
    pub points: Vec<[f64; 2]>,
}

impl KinematicsCloud {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(ManifoldError::DegenerateCloud(format!("{} point(s)", points.len())));
        }
        let n = points.len() as f64;
        let mean = [
            points.iter().map(|p| p[0]).sum::<f64>() / n,
            points.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let mut c = [[0.0; 2]; 2];
        for p in &points {
            let d = [p[0] - mean[0], p[1] - mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += d[i] * d[j] / (n - 1.0);
                }
            }
        }
        let r = [[c[0][0] + COVARIANCE_REG, c[0][1]], [c[1][0], c[1][1] + COVARIANCE_REG]];
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        if !(det > 0.0) || !det.is_finite() {
            return Err(ManifoldError::DegenerateCloud(format!(
                "covariance determinant {det:e}"
            )));
        }
        let inverse = [[r[1][1] / det, -r[0][1] / det], [-r[1][0] / det, r[0][0] / det]];
        Ok(Self {
            mean,
            covariance: c,
            inverse,
            points,
        })
    }

    pub fn from_features<'a>(features: impl IntoIterator<Item = &'a FeatureSet>) -> Result<Self> {
        let points = features
            .into_iter()
            .map(|f| fit_shock_kinematics(f).map(|k| [k.v_cm_per_us, k.a_cm_per_us2]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn mahalanobis(&self, v: f64, a: f64) -> f64 {
        let d = [v - self.mean[0], a - self.mean[1]];
        let q = d[0] * (self.inverse[0][0] * d[0] + self.inverse[0][1] * d[1])
            + d[1] * (self.inverse[1][0] * d[0] + self.inverse[1][1] * d[1]);
        q.max(0.0).sqrt()
    }
}

pub fn ood_score(cloud: &KinematicsCloud, kin: &ShockKinematics) -> OodScore {
    let mahalanobis = cloud.mahalanobis(kin.v_cm_per_us, kin.a_cm_per_us2);
    let verdict = if mahalanobis < INSIDE_LIMIT {
        Verdict::Inside
    } else if mahalanobis < NEAR_LIMIT {
        Verdict::Near
    } else {
        Verdict::Far
    };
    OodScore { mahalanobis, verdict }
}
