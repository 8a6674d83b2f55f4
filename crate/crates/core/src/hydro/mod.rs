//! One-dimensional Lagrangian hydrodynamics for the imploding shell.
//!
//! The solver is a staggered-grid scheme: velocities live on nodes, density
//! and specific internal energy on cells, and cell masses are fixed. The
//! shell is bounded by free surfaces; the inner surface turns into a
//! reflecting wall once it reaches the axis.

mod sequence;
mod solver;

pub(crate) use sequence::cell_volumes;
pub use sequence::{DensitySequence, SequenceIoError, SEQUENCE_HEADER_LEN, SEQUENCE_MAGIC};
pub use solver::{
    advance, init_implosion, remap_to_grid, run_and_sample, run_and_sample_with, shell_nodes, Boundary, Geometry,
    HydroError, HydroState, Solver, SolverConfig,
};

use serde::{Deserialize, Serialize};

/// Initial condition and numerical controls for the shell implosion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImplosionSetup {
    pub r_in_cm: f64,
    pub r_out_cm: f64,
    /// Initial radial velocity, negative for an implosion [cm/μs].
    pub v_impl_cm_per_us: f64,
    pub rho_init_g_per_cc: f64,
    /// Initial temperature of the shell material [K].
    pub t_init_k: f64,
    pub r_domain_cm: f64,
    /// Cells spanning [0, r_domain]; the shell receives the cells that fall in [r_in, r_out].
    pub cells: usize,
    pub cfl: f64,
    pub c_quad: f64,
    pub c_lin: f64,
    /// Points in the uniform output grid, spaced r_domain / cells.
    pub output_points: usize,
}

impl Default for ImplosionSetup {
    fn default() -> Self {
        Self {
            r_in_cm: 8.0,
            r_out_cm: 10.0,
            v_impl_cm_per_us: -0.0675,
            rho_init_g_per_cc: 7.896,
            t_init_k: 298.15,
            r_domain_cm: 16.0,
            cells: 650,
            cfl: 0.5,
            c_quad: 2.0,
            c_lin: 0.5,
            output_points: 360,
        }
    }
}

impl ImplosionSetup {
    pub fn validate(&self) -> Result<(), HydroError> {
        let bad = |msg: &str| Err(HydroError::InvalidSetup(msg.to_string()));
        if !(self.r_in_cm > 0.0 && self.r_in_cm < self.r_out_cm && self.r_out_cm <= self.r_domain_cm) {
            return bad("require 0 < r_in < r_out <= r_domain");
        }
        if self.cells < 10 {
            return bad("cells must be at least 10");
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("cfl must lie in (0, 1)");
        }
        if !(self.rho_init_g_per_cc > 0.0) {
            return bad("rho_init must be positive");
        }
        if self.c_quad < 0.0 || self.c_lin < 0.0 {
            return bad("viscosity coefficients must be non-negative");
        }
        if self.output_points < 2 {
            return bad("output_points must be at least 2");
        }
        if !self.v_impl_cm_per_us.is_finite() || !(self.t_init_k > 0.0) {
            return bad("v_impl must be finite and t_init positive");
        }
        Ok(())
    }

    /// Solver cell width Δx = r_domain / cells.
    pub fn cell_width(&self) -> f64 {
        self.r_domain_cm / self.cells as f64
    }

    pub fn shell_mass(&self) -> f64 {
        4.0 * std::f64::consts::PI / 3.0 * (self.r_out_cm.powi(3) - self.r_in_cm.powi(3)) * self.rho_init_g_per_cc
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.cfl,
            c_quad: self.c_quad,
            c_lin: self.c_lin,
            ..SolverConfig::default()
        }
    }
}

/// Radiograph pulse times t0, t0 + Δt, ….
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnapshotSchedule {
    pub t0_us: f64,
    pub dt_us: f64,
    pub count: usize,
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        Self {
            t0_us: 58.0,
            dt_us: 0.5,
            count: 4,
        }
    }
}

impl SnapshotSchedule {
    pub fn validate(&self) -> Result<(), HydroError> {
        if !(self.dt_us > 0.0) || self.count == 0 || !(self.t0_us >= 0.0) {
            return Err(HydroError::InvalidSetup(
                "schedule needs dt > 0, count >= 1, t0 >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.t0_us + k as f64 * self.dt_us).collect()
    }
}
