//! Subpixel shock and outer-edge locations.
//!
//! Density-side extraction works on the radial density μ = 4πρr², locates a
//! run of negative gradient and places the discontinuity where a two-piece
//! linear fit carries exactly the discrete mass of that run. Radiograph-side
//! extraction finds gradient peaks of the smoothed log-transmission.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydro::DensitySequence;
use crate::radiography::{gaussian_blur, Radiograph};

pub const DEFAULT_FIT_CELLS: usize = 5;
pub const EDGE_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_SMOOTHING_PX: f64 = 2.0;
/// Gradient peaks below this fraction of the largest are ignored.
pub const PEAK_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("NoShockFound: no negative-gradient segment")]
    NoShockFound,
    #[error("NoRootInSegment: no root of the conservation equation in [{lo}, {hi}]")]
    NoRootInSegment { lo: f64, hi: f64 },
    #[error("NoEdgeFound: profile never drops to the vacuum floor")]
    NoEdgeFound,
    #[error("FeatureCountMismatch: found {found} gradient peak(s), need 2")]
    FeatureCountMismatch { found: usize, edge_cm: Option<f64> },
    #[error("snapshot {index}: {source}")]
    Snapshot {
        index: usize,
        #[source]
        source: Box<FeatureError>,
    },
    #[error("GridMismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSet {
    pub times_us: Vec<f64>,
    pub shock_cm: Vec<f64>,
    pub edge_cm: Vec<f64>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    /// Row-major [shock..., edge...] vector used as network conditioning.
    pub fn flatten(&self) -> Vec<f64> {
        self.shock_cm.iter().chain(&self.edge_cm).copied().collect()
    }

    pub fn from_flat(times_us: Vec<f64>, flat: &[f64]) -> Self {
        let n = times_us.len();
        assert_eq!(flat.len(), 2 * n, "feature vector shape");
        Self {
            times_us,
            shock_cm: flat[..n].to_vec(),
            edge_cm: flat[n..].to_vec(),
        }
    }

    pub fn max_abs_diff(&self, other: &FeatureSet) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    pub dr: f64,
    /// μ_k at r_k = k·dr [g/cm].
    pub mu: Vec<f64>,
}

impl RadialDensity {
    pub fn radius(&self, k: usize) -> f64 {
        k as f64 * self.dr
    }

    /// Midpoint-rule ∫μ dr over all points.
    pub fn mass(&self) -> f64 {
        self.mu.iter().sum::<f64>() * self.dr
    }

    /// Central-difference gradient, one-sided at the ends.
    pub fn gradient(&self) -> Vec<f64> {
        let n = self.mu.len();
        let dr = self.dr;
        (0..n)
            .map(|k| match (k, n) {
                (_, 1) => 0.0,
                (0, _) => (self.mu[1] - self.mu[0]) / dr,
                (k, n) if k == n - 1 => (self.mu[k] - self.mu[k - 1]) / dr,
                (k, _) => (self.mu[k + 1] - self.mu[k - 1]) / (2.0 * dr),
            })
            .collect()
    }
}

pub fn radial_density(rho: &[f64], dr: f64) -> RadialDensity {
    let mu = rho
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let r = k as f64 * dr;
            4.0 * PI * p * r * r
        })
        .collect();
    RadialDensity { dr, mu }
}

/// Least-squares line μ ≈ a + b·r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
}

impl LinearFit {
    pub const ZERO: LinearFit = LinearFit { a: 0.0, b: 0.0 };

    fn antiderivative(&self, r: f64) -> f64 {
        self.a * r + 0.5 * self.b * r * r
    }

    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.antiderivative(hi) - self.antiderivative(lo)
    }

    fn fit(mu: &RadialDensity, cells: std::ops::Range<usize>) -> Option<LinearFit> {
        let n = cells.len();
        if n == 0 {
            return None;
        }
        if n == 1 {
            return Some(LinearFit {
                a: mu.mu[cells.start],
                b: 0.0,
            });
        }
        let nf = n as f64;
        let rm = cells.clone().map(|k| mu.radius(k)).sum::<f64>() / nf;
        let ym = cells.clone().map(|k| mu.mu[k]).sum::<f64>() / nf;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for k in cells {
            let dx = mu.radius(k) - rm;
            sxy += dx * (mu.mu[k] - ym);
            sxx += dx * dx;
        }
        let b = sxy / sxx;
        Some(LinearFit { a: ym - b * rm, b })
    }
}

/// Result of one mass-conserving extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Discontinuity {
    pub position: f64,
    /// Outer faces of the negative-gradient run [cm].
    pub lo: f64,
    pub hi: f64,
    pub inner: LinearFit,
    pub outer: LinearFit,
    /// Σ μ_j·Δr over the run.
    pub discrete_mass: f64,
}

impl Discontinuity {
    /// ∫_lo^pos μ− + ∫_pos^hi μ+; equals `discrete_mass` by construction.
    pub fn fitted_mass(&self) -> f64 {
        self.inner.integral(self.lo, self.position) + self.outer.integral(self.position, self.hi)
    }
}

/// Inclusive index range of a run of negative gradient.
type Segment = (usize, usize);

fn negative_segments(grad: &[f64]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &g) in grad.iter().enumerate() {
        match (g < 0.0, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, grad.len() - 1));
    }
    out
}

fn edge_segment(mu: &RadialDensity, segments: &[Segment]) -> Option<Segment> {
    let peak = mu.mu.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    let floor = EDGE_THRESHOLD * peak;
    segments.iter().rev().copied().find(|&(_, hi)| {
        let after = mu.mu.get(hi + 1).copied().unwrap_or(mu.mu[hi]);
        after < floor
    })
}

/// Splits a run at the smallest |∇μ| between its two largest local peaks.
fn split_segment(grad: &[f64], (lo, hi): Segment) -> Option<(Segment, Segment)> {
    let mag = |k: usize| grad[k].abs();
    let mut peaks: Vec<usize> = (lo..=hi)
        .filter(|&k| {
            let left = if k > lo { mag(k - 1) } else { 0.0 };
            let right = if k < hi { mag(k + 1) } else { 0.0 };
            mag(k) > left && mag(k) >= right
        })
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|a, b| mag(*b).total_cmp(&mag(*a)));
    let (p, q) = (peaks[0].min(peaks[1]), peaks[0].max(peaks[1]));
    let cut = (p..=q).min_by(|a, b| mag(*a).total_cmp(&mag(*b)))?;
    let cut = cut.clamp(p, q - 1);
    Some(((lo, cut), (cut + 1, hi)))
}

/// Picks the root of α·x² + β·x + γ = 0 lying in [lo, hi].
fn root_in(alpha: f64, beta: f64, gamma: f64, lo: f64, hi: f64) -> Option<f64> {
    let scale = beta.abs() + alpha.abs() * hi.abs().max(lo.abs());
    let roots: Vec<f64> = if alpha.abs() <= 1e-14 * scale {
        if beta == 0.0 {
            return None;
        }
        vec![-gamma / beta]
    } else {
        let disc = beta * beta - 4.0 * alpha * gamma;
        if disc < 0.0 {
            let x = -beta / (2.0 * alpha);
            vec![x]
        } else {
            let sgn = if beta >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (beta + sgn * disc.sqrt());
            let mut v = vec![q / alpha];
            if q != 0.0 {
                v.push(gamma / q);
            }
            v
        }
    };
    let slack = 1e-12 * (hi - lo).abs().max(1e-300);
    let mid = 0.5 * (lo + hi);
    roots
        .into_iter()
        .filter(|x| x.is_finite() && *x >= lo - slack && *x <= hi + slack)
        .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
        .map(|x| x.clamp(lo, hi))
}

fn conserve(mu: &RadialDensity, (a, b): Segment, inner: LinearFit, outer: LinearFit) -> Result<Discontinuity> {
    let dr = mu.dr;
    let lo = (a as f64 - 0.5) * dr;
    let lo = lo.max(0.0);
    let hi = (b as f64 + 0.5) * dr;
    let discrete_mass: f64 = mu.mu[a..=b].iter().sum::<f64>() * dr;
    // F−(x) − F−(lo) + F+(hi) − F+(x) = M
    let alpha = 0.5 * (inner.b - outer.b);
    let beta = inner.a - outer.a;
    let gamma = outer.antiderivative(hi) - inner.antiderivative(lo) - discrete_mass;
    let position = root_in(alpha, beta, gamma, lo, hi).ok_or(FeatureError::NoRootInSegment { lo, hi })?;
    Ok(Discontinuity {
        position,
        lo,
        hi,
        inner,
        outer,
        discrete_mass,
    })
}

struct Layout {
    shock: Option<Segment>,
    edge: Option<Segment>,
}

fn layout(mu: &RadialDensity) -> Layout {
    let grad = mu.gradient();
    let segments = negative_segments(&grad);
    let mut edge = edge_segment(mu, &segments);
    let mut candidates: Vec<Segment> = segments.iter().copied().filter(|s| Some(*s) != edge).collect();
    if let Some(e) = edge {
        let strongest_elsewhere = candidates
            .iter()
            .flat_map(|&(l, h)| l..=h)
            .map(|k| grad[k].abs())
            .fold(0.0, f64::max);
        if let Some((inner, outer)) = split_segment(&grad, e) {
            let inner_peak = (inner.0..=inner.1).map(|k| grad[k].abs()).fold(0.0, f64::max);
            if inner_peak > strongest_elsewhere {
                candidates.push(inner);
                edge = Some(outer);
            }
        }
    }
    let shock = candidates.into_iter().max_by(|x, y| {
        let peak = |(l, h): Segment| (l..=h).map(|k| grad[k].abs()).fold(0.0, f64::max);
        peak(*x).total_cmp(&peak(*y))
    });
    Layout { shock, edge }
}

pub fn extract_shock_detail(mu: &RadialDensity, n: usize) -> Result<Discontinuity> {
    let Layout { shock, edge, .. } = layout(mu);
    let (a, b) = shock.ok_or(FeatureError::NoShockFound)?;
    let left_start = a.saturating_sub(n);
    let right_stop = match edge {
        Some((e, _)) if e > b => (b + 1 + n).min(e),
        _ => (b + 1 + n).min(mu.mu.len()),
    };
    let inner = LinearFit::fit(mu, left_start..a).ok_or(FeatureError::NoShockFound)?;
    let outer = LinearFit::fit(mu, b + 1..right_stop).unwrap_or(LinearFit::ZERO);
    conserve(mu, (a, b), inner, outer)
}

pub fn extract_shock(mu: &RadialDensity, n: usize) -> Result<f64> {
    extract_shock_detail(mu, n).map(|d| d.position)
}

pub fn extract_edge_detail(mu: &RadialDensity, n: usize) -> Result<Discontinuity> {
    let Layout { shock, edge, .. } = layout(mu);
    let (a, b) = edge.ok_or(FeatureError::NoEdgeFound)?;
    let floor = match shock {
        Some((_, s)) if s < a => s + 1,
        _ => 0,
    };
    let left_start = a.saturating_sub(n).max(floor);
    let inner = match LinearFit::fit(mu, left_start..a) {
        Some(f) => f,
        None if a > 0 => LinearFit {
            a: mu.mu[a - 1],
            b: 0.0,
        },
        None => return Err(FeatureError::NoEdgeFound),
    };
    conserve(mu, (a, b), inner, LinearFit::ZERO)
}

pub fn extract_edge(mu: &RadialDensity, n: usize) -> Result<f64> {
    extract_edge_detail(mu, n).map(|d| d.position)
}

pub fn features_from_sequence(seq: &DensitySequence, n: usize) -> Result<FeatureSet> {
    let mut shock_cm = Vec::with_capacity(seq.snapshots());
    let mut edge_cm = Vec::with_capacity(seq.snapshots());
    for index in 0..seq.snapshots() {
        let wrap = |e: FeatureError| FeatureError::Snapshot {
            index,
            source: Box::new(e),
        };
        let mu = radial_density(seq.snapshot(index), seq.dr);
        shock_cm.push(extract_shock(&mu, n).map_err(wrap)?);
        edge_cm.push(extract_edge(&mu, n).map_err(wrap)?);
    }
    Ok(FeatureSet {
        times_us: seq.times.clone(),
        shock_cm,
        edge_cm,
    })
}

/// Sub-pixel positions (in pixel units) of the gradient-magnitude peaks of
/// the smoothed log signal, outermost first.
pub fn gradient_peaks(signal: &[f64], smoothing_px: f64) -> Vec<f64> {
    let logs: Vec<f64> = signal.iter().map(|s| s.max(f64::MIN_POSITIVE).ln()).collect();
    let smooth = if smoothing_px > 0.0 {
        gaussian_blur(&logs, smoothing_px)
    } else {
        logs
    };
    let n = smooth.len();
    if n < 3 {
        return Vec::new();
    }
    let mag: Vec<f64> = (0..n)
        .map(|k| match k {
            0 => 0.0,
            k if k == n - 1 => 0.0,
            k => 0.5 * (smooth[k + 1] - smooth[k - 1]).abs(),
        })
        .collect();
    let top = mag.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for k in (1..n - 1).rev() {
        if mag[k] > PEAK_THRESHOLD * top && mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] {
            let denom = mag[k - 1] - 2.0 * mag[k] + mag[k + 1];
            let delta = if denom < 0.0 {
                (0.5 * (mag[k - 1] - mag[k + 1]) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            peaks.push(k as f64 + delta);
        }
    }
    peaks
}

pub fn features_from_radiographs(rads: &[Radiograph], times_us: &[f64], smoothing_px: f64) -> Result<FeatureSet> {
    if rads.len() != times_us.len() {
        return Err(FeatureError::GridMismatch(format!(
            "{} radiographs for {} times",
            rads.len(),
            times_us.len()
        )));
    }
    let mut shock_cm = Vec::with_capacity(rads.len());
    let mut edge_cm = Vec::with_capacity(rads.len());
    for (index, rad) in rads.iter().enumerate() {
        let g = &rad.geometry;
        let to_object = |p: f64| (p + 0.5) * g.pixel_pitch_cm / g.magnification;
        let peaks = gradient_peaks(&rad.recorded(), smoothing_px);
        if peaks.len() < 2 {
            return Err(FeatureError::Snapshot {
                index,
                source: Box::new(FeatureError::FeatureCountMismatch {
                    found: peaks.len(),
                    edge_cm: peaks.first().map(|&p| to_object(p)),
                }),
            });
        }
        edge_cm.push(to_object(peaks[0]));
        shock_cm.push(to_object(peaks[1]));
    }
    Ok(FeatureSet {
        times_us: times_us.to_vec(),
        shock_cm,
        edge_cm,
    })
}
