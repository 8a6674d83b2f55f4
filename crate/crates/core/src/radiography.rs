//! Synthetic transmission radiography of spherically symmetric objects.
//!
//! Densities are piecewise constant on the dual cells of a uniform grid
//! r_k = k·dr, so the Abel transform of each cell has a closed form. The
//! detector axis holds pixel centres b_det = (k + ½)·pitch measured from the
//! projected object centre; the object-plane impact parameter is b_det / M.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mass attenuation coefficient used when none is configured [cm²/g].
pub const DEFAULT_MU_MASS_CM2_PER_G: f64 = 0.036;
/// Lower clamp on descattered transmission before taking the logarithm.
pub const TRANSMISSION_FLOOR: f64 = 1e-6;
/// Default scatter blur in detector pixels.
pub const DEFAULT_SCATTER_BLUR_PX: f64 = 20.0;

#[derive(Debug, Error)]
pub enum RadiographyError {
    #[error("GridMismatch: {0}")]
    GridMismatch(String),
    #[error("NegativeFraction: scatter fraction {0} is negative")]
    NegativeFraction(f64),
    #[error("InvalidBlur: blur width {0} must be positive")]
    InvalidBlur(f64),
    #[error("NonPhysicalTransmission: {bad} of {total} pixels are non-positive after descattering")]
    NonPhysicalTransmission { bad: usize, total: usize },
    #[error("InvalidGeometry: {0}")]
    InvalidGeometry(String),
    #[error("IoFailure: {0}")]
    Io(#[from] std::io::Error),
    #[error("ParseFailure: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, RadiographyError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiographyGeometry {
    pub source_object_cm: f64,
    pub object_detector_cm: f64,
    pub magnification: f64,
    pub pixel_pitch_cm: f64,
    pub pixels: usize,
}

impl Default for RadiographyGeometry {
    fn default() -> Self {
        Self::new(133.0, 50.0, 0.025, 512)
    }
}

impl RadiographyGeometry {
    pub fn new(source_object_cm: f64, object_detector_cm: f64, pixel_pitch_cm: f64, pixels: usize) -> Self {
        Self {
            source_object_cm,
            object_detector_cm,
            magnification: (source_object_cm + object_detector_cm) / source_object_cm,
            pixel_pitch_cm,
            pixels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_object_cm > 0.0 && self.object_detector_cm >= 0.0) {
            return Err(RadiographyError::InvalidGeometry("distances must be positive".into()));
        }
        let m = (self.source_object_cm + self.object_detector_cm) / self.source_object_cm;
        if (m - self.magnification).abs() > 1e-9 * m {
            return Err(RadiographyError::InvalidGeometry(format!(
                "magnification {} does not match distances ({m})",
                self.magnification
            )));
        }
        if !(self.pixel_pitch_cm > 0.0) || self.pixels < 3 {
            return Err(RadiographyError::InvalidGeometry(
                "need positive pitch and >= 3 pixels".into(),
            ));
        }
        Ok(())
    }

    /// Detector pixel centres [cm].
    pub fn detector_axis(&self) -> Vec<f64> {
        (0..self.pixels)
            .map(|k| (k as f64 + 0.5) * self.pixel_pitch_cm)
            .collect()
    }

    /// One detector pixel projected onto the object plane [cm].
    pub fn object_pixel(&self) -> f64 {
        self.pixel_pitch_cm / self.magnification
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationModel {
    pub mu_mass_cm2_per_g: f64,
}

impl Default for AttenuationModel {
    fn default() -> Self {
        Self {
            mu_mass_cm2_per_g: DEFAULT_MU_MASS_CM2_PER_G,
        }
    }
}

/// Radial density profile sampled at r_k = k·dr.
#[derive(Debug, Clone, Copy)]
pub struct DensityProfile<'a> {
    pub values: &'a [f64],
    pub dr: f64,
}

impl<'a> DensityProfile<'a> {
    pub fn new(values: &'a [f64], dr: f64) -> Self {
        Self { values, dr }
    }

    fn check(&self) -> Result<()> {
        if !(self.dr > 0.0) || !self.dr.is_finite() || self.values.is_empty() {
            return Err(RadiographyError::GridMismatch(
                "density must be sampled on a non-empty uniform grid with dr > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Radiograph {
    /// Detector-plane coordinate of each pixel centre [cm].
    pub b_cm: Vec<f64>,
    pub direct: Vec<f64>,
    pub scatter: Vec<f64>,
    pub geometry: RadiographyGeometry,
}

impl Radiograph {
    /// Total recorded signal D + S.
    pub fn recorded(&self) -> Vec<f64> {
        self.direct.iter().zip(&self.scatter).map(|(d, s)| d + s).collect()
    }

    /// Object-plane impact parameters b_det / M.
    pub fn object_axis(&self) -> Vec<f64> {
        self.b_cm.iter().map(|b| b / self.geometry.magnification).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "b_cm,direct,scatter")?;
        for k in 0..self.b_cm.len() {
            writeln!(f, "{:e},{:e},{:e}", self.b_cm[k], self.direct[k], self.scatter[k])?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, geometry: RadiographyGeometry) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "b_cm,direct,scatter" => {}
            other => return Err(RadiographyError::Parse(format!("unexpected header {other:?}"))),
        }
        let (mut b, mut d, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| RadiographyError::Parse(format!("line {}: {e}", n + 2)))?;
            if cols.len() != 3 {
                return Err(RadiographyError::Parse(format!("line {}: expected 3 columns", n + 2)));
            }
            b.push(cols[0]);
            d.push(cols[1]);
            s.push(cols[2]);
        }
        Ok(Self {
            b_cm: b,
            direct: d,
            scatter: s,
            geometry,
        })
    }
}

/// Chord integral 2∫_b^R ρ(r)·r/√(r²−b²) dr of a profile that is constant on
/// each dual cell [(k−½)dr, (k+½)dr].
pub fn areal_density(profile: DensityProfile<'_>, b: f64) -> f64 {
    let dr = profile.dr;
    let b2 = b * b;
    let mut total = 0.0;
    let first = ((b / dr) - 0.5).floor().max(0.0) as usize;
    for k in first..profile.values.len() {
        let rho = profile.values[k];
        if rho == 0.0 {
            continue;
        }
        let lo = ((k as f64 - 0.5) * dr).max(0.0).max(b);
        let hi = (k as f64 + 0.5) * dr;
        if hi <= lo {
            continue;
        }
        total += rho * ((hi * hi - b2).sqrt() - (lo * lo - b2).max(0.0).sqrt());
    }
    2.0 * total
}

pub fn forward_transmission(
    profile: DensityProfile<'_>,
    geometry: &RadiographyGeometry,
    atten: &AttenuationModel,
) -> Result<Radiograph> {
    profile.check()?;
    geometry.validate()?;
    let b_cm = geometry.detector_axis();
    let direct = b_cm
        .iter()
        .map(|bd| (-atten.mu_mass_cm2_per_g * areal_density(profile, bd / geometry.magnification)).exp())
        .collect();
    Ok(Radiograph {
        scatter: vec![0.0; b_cm.len()],
        b_cm,
        direct,
        geometry: geometry.clone(),
    })
}

/// Gaussian blur along the radial pixel axis, mirrored at the centre and
/// clamped at the far end.
pub fn gaussian_blur(signal: &[f64], sigma_px: f64) -> Vec<f64> {
    let n = signal.len() as isize;
    let half = (4.0 * sigma_px).ceil() as isize;
    let weights: Vec<f64> = (-half..=half)
        .map(|k| (-0.5 * (k as f64 / sigma_px).powi(2)).exp())
        .collect();
    let norm: f64 = weights.iter().sum();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (w, k) in weights.iter().zip(-half..=half) {
                let mut j = i + k;
                if j < 0 {
                    j = -j - 1;
                }
                let j = j.clamp(0, n - 1);
                acc += w * signal[j as usize];
            }
            acc / norm
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Smooth scatter field S = f·mean(D)·(G∗D)/mean(G∗D); the direct signal is untouched.
pub fn add_scatter(rad: &Radiograph, fraction: f64, blur_px: f64) -> Result<Radiograph> {
    if fraction < 0.0 {
        return Err(RadiographyError::NegativeFraction(fraction));
    }
    if !(blur_px > 0.0) {
        return Err(RadiographyError::InvalidBlur(blur_px));
    }
    let mut out = rad.clone();
    if fraction == 0.0 {
        out.scatter = vec![0.0; rad.direct.len()];
        return Ok(out);
    }
    let blurred = gaussian_blur(&rad.direct, blur_px);
    let scale = fraction * mean(&rad.direct) / mean(&blurred);
    out.scatter = blurred.iter().map(|g| scale * g).collect();
    Ok(out)
}

/// Scatter estimate from the recorded signal assuming fraction `fraction`.
pub fn estimate_scatter(recorded: &[f64], fraction: f64, blur_px: f64) -> Vec<f64> {
    if fraction == 0.0 {
        return vec![0.0; recorded.len()];
    }
    let blurred = gaussian_blur(recorded, blur_px);
    let scale = fraction / (1.0 + fraction) * mean(recorded) / mean(&blurred);
    blurred.iter().map(|g| scale * g).collect()
}

/// Inverse Abel transform of a sampled areal-density profile.
///
/// `b` must be increasing and positive. A(b) is interpolated linearly between
/// samples, held flat on [0, b₀] and ramped to zero over one extra sample
/// beyond the last, so the kernel 1/√(b²−r²) integrates in closed form.
pub fn inverse_abel(b: &[f64], areal: &[f64], radii: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut slopes = Vec::with_capacity(n);
    for k in 0..n.saturating_sub(1) {
        nodes.push((b[k], b[k + 1]));
        slopes.push((areal[k + 1] - areal[k]) / (b[k + 1] - b[k]));
    }
    if n >= 2 {
        let step = b[n - 1] - b[n - 2];
        nodes.push((b[n - 1], b[n - 1] + step));
        slopes.push(-areal[n - 1] / step);
    }
    radii
        .iter()
        .map(|&r| {
            let mut acc = 0.0;
            for (&(lo, hi), &s) in nodes.iter().zip(&slopes) {
                if hi <= r || s == 0.0 {
                    continue;
                }
                let lo = lo.max(r);
                let kernel = if r <= 1e-12 * hi {
                    (hi / lo).ln()
                } else {
                    acosh(hi / r) - acosh(lo / r)
                };
                acc += s * kernel;
            }
            -acc / std::f64::consts::PI
        })
        .collect()
}

fn acosh(x: f64) -> f64 {
    (x + (x * x - 1.0).max(0.0).sqrt()).ln()
}

/// Direct Abel-inversion reconstruction on the grid r_k = k·dr, k < points.
pub fn abel_invert(
    rad: &Radiograph,
    atten: &AttenuationModel,
    descatter_fraction: f64,
    blur_px: f64,
    points: usize,
    dr: f64,
) -> Result<Vec<f64>> {
    if descatter_fraction < 0.0 {
        return Err(RadiographyError::NegativeFraction(descatter_fraction));
    }
    let recorded = rad.recorded();
    let scatter = estimate_scatter(&recorded, descatter_fraction, blur_px);
    let mut bad = 0;
    let areal: Vec<f64> = recorded
        .iter()
        .zip(&scatter)
        .map(|(r, s)| {
            let t = r - s;
            if t <= 0.0 {
                bad += 1;
            }
            -t.max(TRANSMISSION_FLOOR).ln() / atten.mu_mass_cm2_per_g
        })
        .collect();
    if bad * 10 > recorded.len() {
        return Err(RadiographyError::NonPhysicalTransmission {
            bad,
            total: recorded.len(),
        });
    }
    let radii: Vec<f64> = (0..points).map(|k| k as f64 * dr).collect();
    Ok(inverse_abel(&rad.object_axis(), &areal, &radii))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(points: usize, _dr: f64, radius_cells: usize, rho: f64) -> Vec<f64> {
        (0..points).map(|k| if k < radius_cells { rho } else { 0.0 }).collect()
    }

    #[test]
    fn vacuum_is_transparent() {
        let rho = vec![0.0; 100];
        let rad = forward_transmission(
            DensityProfile::new(&rho, 0.05),
            &RadiographyGeometry::default(),
            &AttenuationModel::default(),
        )
        .unwrap();
        assert!(rad.direct.iter().all(|&d| d == 1.0));
        assert!(rad.scatter.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn uniform_sphere_matches_chord_length() {
        let dr = 0.05;
        let rho = sphere(200, dr, 60, 2.0);
        let radius = 59.5 * dr;
        let geom = RadiographyGeometry::default();
        let atten = AttenuationModel {
            mu_mass_cm2_per_g: 0.05,
        };
        let rad = forward_transmission(DensityProfile::new(&rho, dr), &geom, &atten).unwrap();
        for (b, d) in rad.object_axis().iter().zip(&rad.direct) {
            let chord = if *b < radius {
                2.0 * 2.0 * (radius * radius - b * b).sqrt()
            } else {
                0.0
            };
            assert!((d - (-0.05 * chord).exp()).abs() < 1e-12, "b={b}");
        }
    }

    #[test]
    fn magnification_follows_distances() {
        let g = RadiographyGeometry::default();
        assert!((g.magnification - 183.0 / 133.0).abs() < 1e-15);
        assert!((g.magnification - 1.376).abs() < 1e-3);
        let mut bad = g.clone();
        bad.magnification = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scatter_normalisation() {
        let dr = 0.05;
        let rho = sphere(200, dr, 60, 5.0);
        let rad = forward_transmission(
            DensityProfile::new(&rho, dr),
            &RadiographyGeometry::default(),
            &AttenuationModel::default(),
        )
        .unwrap();
        let none = add_scatter(&rad, 0.0, 20.0).unwrap();
        assert_eq!(none, rad);
        let s = add_scatter(&rad, 0.3, 20.0).unwrap();
        assert_eq!(s.direct, rad.direct);
        assert!((mean(&s.scatter) / mean(&s.direct) - 0.3).abs() < 1e-10);
        assert!(matches!(
            add_scatter(&rad, -0.1, 20.0),
            Err(RadiographyError::NegativeFraction(_))
        ));
    }

    #[test]
    fn scatter_is_linear_in_fraction() {
        let dr = 0.05;
        let rho = sphere(200, dr, 80, 3.0);
        let rad = forward_transmission(
            DensityProfile::new(&rho, dr),
            &RadiographyGeometry::default(),
            &AttenuationModel::default(),
        )
        .unwrap();
        let a = add_scatter(&rad, 0.1, 20.0).unwrap();
        let b = add_scatter(&rad, 0.3, 20.0).unwrap();
        for (x, y) in a.scatter.iter().zip(&b.scatter) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_object_inverts_to_zero() {
        let rho = vec![0.0; 100];
        let rad = forward_transmission(
            DensityProfile::new(&rho, 0.05),
            &RadiographyGeometry::default(),
            &AttenuationModel::default(),
        )
        .unwrap();
        let back = abel_invert(&rad, &AttenuationModel::default(), 0.0, 20.0, 100, 0.05).unwrap();
        assert!(back.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn opaque_radiograph_is_rejected() {
        let geom = RadiographyGeometry::default();
        let rad = Radiograph {
            b_cm: geom.detector_axis(),
            direct: vec![0.0; geom.pixels],
            scatter: vec![0.0; geom.pixels],
            geometry: geom,
        };
        assert!(matches!(
            abel_invert(&rad, &AttenuationModel::default(), 0.0, 20.0, 10, 0.1),
            Err(RadiographyError::NonPhysicalTransmission { .. })
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let dr = 0.05;
        let rho = sphere(200, dr, 60, 2.0);
        let rad = forward_transmission(
            DensityProfile::new(&rho, dr),
            &RadiographyGeometry::default(),
            &AttenuationModel::default(),
        )
        .unwrap();
        let rad = add_scatter(&rad, 0.2, 10.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        rad.write_csv(&path).unwrap();
        let back = Radiograph::read_csv(&path, rad.geometry.clone()).unwrap();
        assert_eq!(back, rad);
    }
}
