//! Mie-Grüneisen equation of state in the canonical (cm, g, μs) unit system.
//!
//! Pressures are in g·cm⁻¹·μs⁻² (1 unit = 100 GPa), specific energies in
//! cm²·μs⁻², temperatures in kelvin. The temperature form
//!
//! ```text
//! P(χ, T) = ρ0·cs²·χ·(1 − Γ0·χ/2) / (1 − s1·χ)² + Γ0·ρ0·cV·(T − T0),   χ = 1 − ρ0/ρ
//! ```
//!
//! is closed in (ρ, e) by the Hugoniot reference energy
//! `e_ref(χ) = P_ref(χ)·χ / (2ρ0)` so that `e − e_ref(χ) = cV·(T − T0)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Kelvin per electron-volt.
pub const KELVIN_PER_EV: f64 = 11604.5;
/// 1 erg/g expressed in cm²/μs².
pub const ERG_PER_GRAM_IN_CANONICAL: f64 = 1e-12;
/// Margin kept between χ and the pole of the cold curve at χ = 1/s1.
pub const DENOM_EPS: f64 = 1e-6;
/// Lower clamp for the sound speed [cm/μs].
pub const SOUND_SPEED_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EosError {
    #[error("NonPositiveDensity: density {0} g/cm^3 is not positive")]
    NonPositiveDensity(f64),
    #[error("CompressionSingularity: compression {chi} reached the limit {limit}")]
    CompressionSingularity { chi: f64, limit: f64 },
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, EosError>;

/// Mie-Grüneisen parameters: the varied vector σ = (T0, cs, s1, Γ0, cV) and the fixed ρ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EosParams {
    #[serde(rename = "T0_K")]
    pub t0: f64,
    #[serde(rename = "cs_cm_per_us")]
    pub cs: f64,
    #[serde(rename = "s1")]
    pub s1: f64,
    #[serde(rename = "Gamma0")]
    pub gamma0: f64,
    /// Specific heat as tabulated, erg·g⁻¹·eV⁻¹.
    #[serde(rename = "cV_erg_per_g_eV")]
    pub cv: f64,
    #[serde(rename = "rho0_g_per_cc")]
    pub rho0: f64,
}

impl Default for EosParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl EosParams {
    /// Nominal steel parameters.
    pub const fn nominal() -> Self {
        Self {
            t0: 293.15,
            cs: 0.4569,
            s1: 1.49,
            gamma0: 2.17,
            cv: 5.18e10,
            rho0: 7.896,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.rho0 > 0.0, "rho0 must be positive"),
            (self.cs > 0.0, "cs must be positive"),
            (self.cv > 0.0, "cV must be positive"),
            (self.s1 > 1.0, "s1 must exceed 1"),
            (self.gamma0 > 0.0, "Gamma0 must be positive"),
            (self.t0 > 0.0, "T0 must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(EosError::InvalidParams(msg.to_string()));
            }
        }
        if self.as_vector().iter().any(|v| !v.is_finite()) || !self.rho0.is_finite() {
            return Err(EosError::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Specific heat in cm²·μs⁻²·K⁻¹.
    pub fn cv_canonical(&self) -> f64 {
        self.cv / KELVIN_PER_EV * ERG_PER_GRAM_IN_CANONICAL
    }

    /// The varied vector (T0, cs, s1, Γ0, cV).
    pub fn as_vector(&self) -> [f64; 5] {
        [self.t0, self.cs, self.s1, self.gamma0, self.cv]
    }

    pub fn from_vector(v: [f64; 5], rho0: f64) -> Self {
        Self {
            t0: v[0],
            cs: v[1],
            s1: v[2],
            gamma0: v[3],
            cv: v[4],
            rho0,
        }
    }

    /// Applies fractional offsets (0.1 = +10%) to each component of σ.
    pub fn with_offsets(&self, offsets: [f64; 5]) -> Self {
        let mut v = self.as_vector();
        for (x, o) in v.iter_mut().zip(offsets) {
            *x *= 1.0 + o;
        }
        Self::from_vector(v, self.rho0)
    }

    /// Fractional offsets of `self` relative to `reference`.
    pub fn offsets_from(&self, reference: &EosParams) -> [f64; 5] {
        let a = self.as_vector();
        let b = reference.as_vector();
        std::array::from_fn(|k| a[k] / b[k] - 1.0)
    }

    fn thermal_coefficient(&self) -> f64 {
        self.gamma0 * self.rho0 * self.cv_canonical()
    }
}

/// Compression χ = 1 − ρ0/ρ, checked against the cold-curve pole.
pub fn compression(rho: f64, p: &EosParams) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(EosError::NonPositiveDensity(rho));
    }
    let chi = 1.0 - p.rho0 / rho;
    let limit = 1.0 / p.s1 - DENOM_EPS;
    if chi >= limit {
        return Err(EosError::CompressionSingularity { chi, limit });
    }
    Ok(chi)
}

/// Cold (reference) pressure P_ref(χ).
pub fn reference_pressure(chi: f64, p: &EosParams) -> f64 {
    let den = 1.0 - p.s1 * chi;
    p.rho0 * p.cs * p.cs * chi * (1.0 - 0.5 * p.gamma0 * chi) / (den * den)
}

/// dP_ref/dχ.
fn reference_pressure_slope(chi: f64, p: &EosParams) -> f64 {
    let den = 1.0 - p.s1 * chi;
    let num = chi - 0.5 * p.gamma0 * chi * chi;
    let dnum = 1.0 - p.gamma0 * chi;
    p.rho0 * p.cs * p.cs * (dnum * den + 2.0 * p.s1 * num) / (den * den * den)
}

/// Hugoniot reference energy e_ref(χ) = P_ref(χ)·χ/(2ρ0).
pub fn reference_energy(chi: f64, p: &EosParams) -> f64 {
    reference_pressure(chi, p) * chi / (2.0 * p.rho0)
}

pub fn mg_pressure(rho: f64, temperature: f64, p: &EosParams) -> Result<f64> {
    let chi = compression(rho, p)?;
    Ok(reference_pressure(chi, p) + p.thermal_coefficient() * (temperature - p.t0))
}

pub fn mg_pressure_from_energy(rho: f64, e: f64, p: &EosParams) -> Result<f64> {
    let chi = compression(rho, p)?;
    Ok(reference_pressure(chi, p) + p.gamma0 * p.rho0 * (e - reference_energy(chi, p)))
}

/// Specific internal energy of the state (ρ, T).
pub fn energy_from_temperature(rho: f64, temperature: f64, p: &EosParams) -> Result<f64> {
    let chi = compression(rho, p)?;
    Ok(reference_energy(chi, p) + p.cv_canonical() * (temperature - p.t0))
}

pub fn temperature_from_energy(rho: f64, e: f64, p: &EosParams) -> Result<f64> {
    let chi = compression(rho, p)?;
    Ok(p.t0 + (e - reference_energy(chi, p)) / p.cv_canonical())
}

/// Adiabatic sound speed, c² = ∂P/∂ρ|e + (P/ρ²)·∂P/∂e|ρ, floored at [`SOUND_SPEED_FLOOR`].
pub fn mg_sound_speed(rho: f64, e: f64, p: &EosParams) -> Result<f64> {
    let chi = compression(rho, p)?;
    let pressure = reference_pressure(chi, p) + p.gamma0 * p.rho0 * (e - reference_energy(chi, p));
    let dpref = reference_pressure_slope(chi, p);
    let deref = (dpref * chi + reference_pressure(chi, p)) / (2.0 * p.rho0);
    let dchi_drho = p.rho0 / (rho * rho);
    let dp_drho = (dpref - p.gamma0 * p.rho0 * deref) * dchi_drho;
    let dp_de = p.gamma0 * p.rho0;
    let c2 = dp_drho + pressure / (rho * rho) * dp_de;
    Ok(c2.max(SOUND_SPEED_FLOOR * SOUND_SPEED_FLOOR).sqrt())
}

pub fn ideal_gas_pressure(rho: f64, e: f64, gamma: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(EosError::NonPositiveDensity(rho));
    }
    Ok((gamma - 1.0) * rho * e)
}

pub fn ideal_gas_sound_speed(rho: f64, e: f64, gamma: f64) -> Result<f64> {
    let pressure = ideal_gas_pressure(rho, e, gamma)?;
    let c2 = gamma * pressure / rho;
    Ok(c2.max(SOUND_SPEED_FLOOR * SOUND_SPEED_FLOOR).sqrt())
}

/// A closure P(ρ, e) usable by the hydro solver. Tabular models plug in here.
pub trait Eos: Send + Sync {
    fn pressure(&self, rho: f64, e: f64) -> Result<f64>;
    fn sound_speed(&self, rho: f64, e: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MieGruneisen(pub EosParams);

impl Eos for MieGruneisen {
    fn pressure(&self, rho: f64, e: f64) -> Result<f64> {
        mg_pressure_from_energy(rho, e, &self.0)
    }

    fn sound_speed(&self, rho: f64, e: f64) -> Result<f64> {
        mg_sound_speed(rho, e, &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealGas {
    pub gamma: f64,
}

impl Eos for IdealGas {
    fn pressure(&self, rho: f64, e: f64) -> Result<f64> {
        ideal_gas_pressure(rho, e, self.gamma)
    }

    fn sound_speed(&self, rho: f64, e: f64) -> Result<f64> {
        ideal_gas_sound_speed(rho, e, self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn reference_state_is_pressure_free() {
        let p = EosParams::nominal();
        assert_eq!(mg_pressure(p.rho0, p.t0, &p).unwrap(), 0.0);
        assert_eq!(mg_pressure_from_energy(p.rho0, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn thermal_term_at_reference_density() {
        // Γ0·ρ0·cV'·ΔT with cV' = 5.18e10 / 11604.5 · 1e-12, evaluated by hand:
        // 5.18e10/11604.5 = 4463785.600...; ·1e-12 = 4.4637856e-6
        // 2.17 · 7.896 · 4.4637856e-6 · 100 = 7.648393...e-3
        let p = EosParams::nominal();
        let cv = 5.18e10_f64 / 11604.5 * 1e-12;
        let expected = 2.17 * 7.896 * cv * 100.0;
        let got = mg_pressure(p.rho0, p.t0 + 100.0, &p).unwrap();
        assert!(rel(got, expected) < 1e-14);
        assert!((got - 7.648_393_088_887_93e-3).abs() < 1e-15);
    }

    #[test]
    fn cold_term_at_ten_percent_compression() {
        let p = EosParams::nominal();
        let chi = 1.0 - 1.0 / 1.1;
        let expected = 7.896 * 0.4569 * 0.4569 * chi * (1.0 - 0.5 * 2.17 * chi) / (1.0_f64 - 1.49 * chi).powi(2);
        // ≈ 0.1807 g/(cm μs²) ≈ 18 GPa
        let got = mg_pressure(1.1 * p.rho0, p.t0, &p).unwrap();
        assert!(rel(got, expected) < 1e-14);
        assert!((got - 0.180_709_564_983_590_3).abs() < 1e-12, "{got}");
    }

    #[test]
    fn singular_and_nonpositive_inputs_are_rejected() {
        let p = EosParams::nominal();
        let rho_pole = p.rho0 / (1.0 - 1.0 / p.s1);
        assert!(matches!(
            mg_pressure(rho_pole, p.t0, &p),
            Err(EosError::CompressionSingularity { .. })
        ));
        assert!(matches!(
            mg_pressure(0.0, p.t0, &p),
            Err(EosError::NonPositiveDensity(_))
        ));
        assert!(matches!(
            ideal_gas_pressure(-1.0, 1.0, 1.4),
            Err(EosError::NonPositiveDensity(_))
        ));
    }

    #[test]
    fn energy_form_hits_cold_curve_at_reference_energy() {
        let p = EosParams::nominal();
        let rho = 9.0;
        let chi = compression(rho, &p).unwrap();
        let e = reference_energy(chi, &p);
        assert_eq!(
            mg_pressure_from_energy(rho, e, &p).unwrap(),
            reference_pressure(chi, &p)
        );
    }

    #[test]
    fn temperature_and_energy_forms_agree() {
        let p = EosParams::nominal();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let rho = rng.random_range(0.7 * p.rho0..1.5 * p.rho0);
            let t = rng.random_range(100.0..5000.0);
            let e = energy_from_temperature(rho, t, &p).unwrap();
            let a = mg_pressure_from_energy(rho, e, &p).unwrap();
            let b = mg_pressure(rho, t, &p).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "{a} vs {b}");
            let t_back = temperature_from_energy(rho, e, &p).unwrap();
            assert!((t_back - t).abs() < 1e-6);
        }
    }

    fn fd_sound_speed_sq(rho: f64, e: f64, p: &EosParams) -> f64 {
        let hr = 1e-6 * rho;
        let he = 1e-6 * (e.abs() + 1e-3);
        let f = |r: f64, e: f64| mg_pressure_from_energy(r, e, p).unwrap();
        let dpdr = (f(rho + hr, e) - f(rho - hr, e)) / (2.0 * hr);
        let dpde = (f(rho, e + he) - f(rho, e - he)) / (2.0 * he);
        dpdr + f(rho, e) / (rho * rho) * dpde
    }

    #[test]
    fn sound_speed_reduces_to_cs_at_reference() {
        let p = EosParams::nominal();
        let c = mg_sound_speed(p.rho0, 0.0, &p).unwrap();
        assert!(rel(c, p.cs) < 1e-10);
        assert!(rel(c * c, fd_sound_speed_sq(p.rho0, 0.0, &p)) < 1e-6);
    }

    #[test]
    fn sound_speed_matches_finite_differences_on_grid() {
        let p = EosParams::nominal();
        for i in 0..10 {
            let rho = p.rho0 * (0.85 + 0.06 * i as f64);
            for j in 0..10 {
                let e = 0.02 * j as f64;
                let c = mg_sound_speed(rho, e, &p).unwrap();
                let fd = fd_sound_speed_sq(rho, e, &p);
                assert!(fd > 0.0);
                assert!(rel(c * c, fd) < 1e-6, "rho={rho} e={e}: {} vs {fd}", c * c);
            }
        }
    }

    #[test]
    fn sound_speed_floor_applies() {
        let p = EosParams::nominal();
        let c = mg_sound_speed(0.6 * p.rho0, -5.0, &p).unwrap();
        assert_eq!(c, SOUND_SPEED_FLOOR);
    }

    #[test]
    fn ideal_gas_examples() {
        assert!((ideal_gas_pressure(1.0, 2.5, 1.4).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ideal_gas_pressure(3.0, 0.0, 1.4).unwrap(), 0.0);
    }

    #[test]
    fn params_json_keys() {
        let json = serde_json::to_value(EosParams::nominal()).unwrap();
        for key in [
            "T0_K",
            "cs_cm_per_us",
            "s1",
            "Gamma0",
            "cV_erg_per_g_eV",
            "rho0_g_per_cc",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: EosParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, EosParams::nominal());
    }

    proptest! {
        #[test]
        fn pressure_increases_with_temperature(rho_frac in 0.8f64..1.4, t in 50.0f64..3000.0, dt in 0.1f64..500.0) {
            let p = EosParams::nominal();
            let rho = rho_frac * p.rho0;
            prop_assert!(mg_pressure(rho, t + dt, &p).unwrap() > mg_pressure(rho, t, &p).unwrap());
        }

        #[test]
        fn reference_state_zero_for_any_params(o in proptest::array::uniform5(-0.1f64..0.1)) {
            let p = EosParams::nominal().with_offsets(o);
            prop_assert_eq!(mg_pressure(p.rho0, p.t0, &p).unwrap(), 0.0);
        }

        #[test]
        fn ideal_gas_matches_formula(rho in 1e-3f64..10.0, e in 0.0f64..10.0, g in 1.01f64..3.0) {
            let expected = (g - 1.0) * rho * e;
            prop_assert!((ideal_gas_pressure(rho, e, g).unwrap() - expected).abs() <= 1e-14 * expected.max(1.0));
        }
    }
}
