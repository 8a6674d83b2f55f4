use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DensitySequence, ImplosionSetup, SnapshotSchedule};
use crate::eos::{self, Eos, EosError, EosParams, MieGruneisen};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydroError {
    #[error("InvalidSetup: {0}")]
    InvalidSetup(String),
    #[error("TimestepCollapse: dt = {dt:e} us at t = {time} us")]
    TimestepCollapse { time: f64, dt: f64 },
    #[error("MeshTangled: node {node} overtook its neighbour at t = {time} us")]
    MeshTangled { time: f64, node: usize },
    #[error("{source} (cell {cell}, t = {time} us)")]
    Eos {
        cell: usize,
        time: f64,
        #[source]
        source: EosError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Planar,
    Spherical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero external pressure. A free inner surface in spherical geometry
    /// becomes a wall when it reaches the axis.
    Free,
    /// Node pinned at its position.
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub c_quad: f64,
    pub c_lin: f64,
    pub dt_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            c_quad: 2.0,
            c_lin: 0.5,
            dt_min: 1e-9,
        }
    }
}

/// Lagrangian state: `radii`/`velocities` on the Nc+1 nodes, the rest on the Nc cells.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroState {
    pub geometry: Geometry,
    pub inner: Boundary,
    pub outer: Boundary,
    pub radii: Vec<f64>,
    pub velocities: Vec<f64>,
    pub density: Vec<f64>,
    pub energy: Vec<f64>,
    pub mass: Vec<f64>,
    pub time: f64,
}

impl HydroState {
    /// Builds a state from node positions and per-cell (ρ, u-at-nodes, e); masses follow from volumes.
    pub fn from_cells(
        geometry: Geometry,
        radii: Vec<f64>,
        velocities: Vec<f64>,
        density: Vec<f64>,
        energy: Vec<f64>,
    ) -> Self {
        let mass = (0..density.len())
            .map(|i| density[i] * volume_between(geometry, radii[i], radii[i + 1]))
            .collect();
        Self {
            geometry,
            inner: Boundary::Wall,
            outer: Boundary::Wall,
            radii,
            velocities,
            density,
            energy,
            mass,
            time: 0.0,
        }
    }

    pub fn cells(&self) -> usize {
        self.density.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn node_masses(&self) -> Vec<f64> {
        let n = self.cells();
        (0..=n)
            .map(|j| {
                let left = if j > 0 { self.mass[j - 1] } else { 0.0 };
                let right = if j < n { self.mass[j] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.node_masses()
            .iter()
            .zip(&self.velocities)
            .map(|(m, u)| 0.5 * m * u * u)
            .sum()
    }

    pub fn internal_energy(&self) -> f64 {
        self.mass.iter().zip(&self.energy).map(|(m, e)| m * e).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.kinetic_energy() + self.internal_energy()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        self.radii.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn area(&self, r: f64) -> f64 {
        area(self.geometry, r)
    }
}

fn area(geometry: Geometry, r: f64) -> f64 {
    match geometry {
        Geometry::Planar => 1.0,
        Geometry::Spherical => 4.0 * PI * r * r,
    }
}

fn volume_between(geometry: Geometry, a: f64, b: f64) -> f64 {
    match geometry {
        Geometry::Planar => b - a,
        Geometry::Spherical => 4.0 * PI / 3.0 * (b * b * b - a * a * a),
    }
}

/// Lagrangian node radii for the shell.
///
/// Cells are sized so that, once the shell has collapsed into a solid sphere
/// of the same mass, each is about one solver cell width Δx wide; initial
/// widths are bounded below by Δx/8.
pub fn shell_nodes(setup: &ImplosionSetup) -> Vec<f64> {
    let dx = setup.cell_width();
    let min_width = dx / 8.0;
    let r_in3 = setup.r_in_cm.powi(3);
    let mut radii = vec![setup.r_in_cm];
    loop {
        let r = *radii.last().unwrap();
        let s = (r.powi(3) - r_in3).max(0.0).cbrt();
        let next = (r_in3 + (s + dx).powi(3)).cbrt().max(r + min_width);
        if next >= setup.r_out_cm - 0.5 * min_width {
            break;
        }
        radii.push(next);
    }
    radii.push(setup.r_out_cm);
    radii
}

/// Shell of uniform density and velocity between r_in and r_out, bounded by
/// free surfaces, at temperature `t_init_k`.
pub fn init_implosion(setup: &ImplosionSetup, params: &EosParams) -> Result<HydroState, HydroError> {
    setup.validate()?;
    params.validate().map_err(|source| HydroError::Eos {
        cell: 0,
        time: 0.0,
        source,
    })?;
    let radii = shell_nodes(setup);
    let n = radii.len() - 1;
    let rho = setup.rho_init_g_per_cc;
    let e = eos::energy_from_temperature(rho, setup.t_init_k, params).map_err(|source| HydroError::Eos {
        cell: 0,
        time: 0.0,
        source,
    })?;
    let mut state = HydroState::from_cells(
        Geometry::Spherical,
        radii,
        vec![setup.v_impl_cm_per_us; n + 1],
        vec![rho; n],
        vec![e; n],
    );
    state.inner = Boundary::Free;
    state.outer = Boundary::Free;
    Ok(state)
}

pub struct Solver<E: Eos> {
    pub eos: E,
    pub config: SolverConfig,
}

impl<E: Eos> Solver<E> {
    pub fn new(eos: E, config: SolverConfig) -> Self {
        Self { eos, config }
    }

    fn pressures(&self, state: &HydroState, rho: &[f64], e: &[f64]) -> Result<Vec<f64>, HydroError> {
        rho.iter()
            .zip(e)
            .enumerate()
            .map(|(cell, (&r, &e))| {
                self.eos.pressure(r, e).map_err(|source| HydroError::Eos {
                    cell,
                    time: state.time,
                    source,
                })
            })
            .collect()
    }

    fn viscosity(&self, rho: &[f64], c: &[f64], u: &[f64]) -> Vec<f64> {
        (0..rho.len())
            .map(|i| {
                let du = u[i + 1] - u[i];
                if du < 0.0 {
                    self.config.c_quad * rho[i] * du * du + self.config.c_lin * rho[i] * c[i] * du.abs()
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn pinned(&self, state: &HydroState, node: usize) -> bool {
        let n = state.cells();
        (node == 0 && state.inner == Boundary::Wall) || (node == n && state.outer == Boundary::Wall)
    }

    /// Stable timestep from the CFL condition.
    pub fn stable_dt(&self, state: &HydroState) -> Result<f64, HydroError> {
        let mut dt = f64::INFINITY;
        for i in 0..state.cells() {
            let c = self
                .eos
                .sound_speed(state.density[i], state.energy[i])
                .map_err(|source| HydroError::Eos {
                    cell: i,
                    time: state.time,
                    source,
                })?;
            let dr = state.radii[i + 1] - state.radii[i];
            let du = (state.velocities[i + 1] - state.velocities[i]).abs();
            dt = dt.min(dr / (c + du));
        }
        Ok(self.config.cfl * dt)
    }

    /// Advances `state` by one predictor-corrector step of at most `dt_max`; returns the step taken.
    pub fn step(&self, state: &mut HydroState, dt_max: f64) -> Result<f64, HydroError> {
        let n = state.cells();
        let cfl_dt = self.stable_dt(state)?;
        if cfl_dt < self.config.dt_min {
            return Err(HydroError::TimestepCollapse {
                time: state.time,
                dt: cfl_dt,
            });
        }
        let dt = cfl_dt.min(dt_max);
        let node_mass = state.node_masses();

        let sound: Vec<f64> = (0..n)
            .map(|i| self.eos.sound_speed(state.density[i], state.energy[i]).unwrap_or(0.0))
            .collect();
        let p0 = self.pressures(state, &state.density, &state.energy)?;
        let q0 = self.viscosity(&state.density, &sound, &state.velocities);

        // Predictor: half step with forces frozen at t^n.
        let half = 0.5 * dt;
        let r_half: Vec<f64> = state
            .radii
            .iter()
            .zip(&state.velocities)
            .map(|(r, u)| r + half * u)
            .collect();
        let mut e_half = state.energy.clone();
        let mut rho_half = state.density.clone();
        for i in 0..n {
            let flux = state.area(state.radii[i + 1]) * state.velocities[i + 1]
                - state.area(state.radii[i]) * state.velocities[i];
            e_half[i] -= half * (p0[i] + q0[i]) * flux / state.mass[i];
            let vol = volume_between(state.geometry, r_half[i].max(0.0), r_half[i + 1]);
            if !(vol > 0.0) {
                return Err(HydroError::MeshTangled {
                    time: state.time,
                    node: i + 1,
                });
            }
            rho_half[i] = state.mass[i] / vol;
        }
        let p_half = self.pressures(state, &rho_half, &e_half)?;
        let q_half = self.viscosity(&rho_half, &sound, &state.velocities);
        let total: Vec<f64> = p_half.iter().zip(&q_half).map(|(p, q)| p + q).collect();

        // Corrector: time-centred forces, compatible energy update.
        let a_half: Vec<f64> = r_half.iter().map(|&r| state.area(r.max(0.0))).collect();
        let mut u_new = state.velocities.clone();
        for j in 0..=n {
            if self.pinned(state, j) {
                u_new[j] = 0.0;
                continue;
            }
            let left = if j > 0 { total[j - 1] } else { 0.0 };
            let right = if j < n { total[j] } else { 0.0 };
            u_new[j] += dt * a_half[j] * (left - right) / node_mass[j];
        }
        let u_bar: Vec<f64> = state
            .velocities
            .iter()
            .zip(&u_new)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        for (r, u) in state.radii.iter_mut().zip(&u_bar) {
            *r += dt * u;
        }
        for i in 0..n {
            let flux = a_half[i + 1] * u_bar[i + 1] - a_half[i] * u_bar[i];
            state.energy[i] -= dt * total[i] * flux / state.mass[i];
        }
        state.velocities = u_new;
        state.time += dt;

        if state.geometry == Geometry::Spherical && state.inner == Boundary::Free && state.radii[0] <= 0.0 {
            // Stagnation on the axis: the arriving node's kinetic energy is
            // deposited in the innermost cell.
            let u0 = state.velocities[0];
            state.energy[0] += 0.5 * node_mass[0] * u0 * u0 / state.mass[0];
            state.radii[0] = 0.0;
            state.velocities[0] = 0.0;
            state.inner = Boundary::Wall;
        }

        for i in 0..n {
            let vol = volume_between(state.geometry, state.radii[i], state.radii[i + 1]);
            if !(state.radii[i + 1] > state.radii[i]) || !(vol > 0.0) {
                return Err(HydroError::MeshTangled {
                    time: state.time,
                    node: i + 1,
                });
            }
            state.density[i] = state.mass[i] / vol;
        }
        Ok(dt)
    }

    /// Advances to `t_end` exactly.
    pub fn run_until(&self, state: &mut HydroState, t_end: f64) -> Result<(), HydroError> {
        while state.time < t_end {
            let remaining = t_end - state.time;
            if remaining < self.config.dt_min {
                state.time = t_end;
                break;
            }
            let dt = self.step(state, remaining)?;
            if dt >= remaining {
                state.time = t_end;
            }
        }
        Ok(())
    }
}

/// One step of the Mie-Grüneisen shell solver with default numerics.
pub fn advance(state: &HydroState, params: &EosParams, dt_max: f64) -> Result<HydroState, HydroError> {
    let solver = Solver::new(MieGruneisen(*params), SolverConfig::default());
    let mut next = state.clone();
    solver.step(&mut next, dt_max)?;
    Ok(next)
}

/// Conservative remap of the Lagrangian cells onto grid points r_k = k·dr, each
/// owning the dual cell [(k−½)dr, (k+½)dr] ∩ [0, ∞).
pub fn remap_to_grid(state: &HydroState, points: usize, dr: f64) -> Vec<f64> {
    let measure = |a: f64, b: f64| match state.geometry {
        Geometry::Planar => b - a,
        Geometry::Spherical => b * b * b - a * a * a,
    };
    let mut out = vec![0.0; points];
    let mut cell = 0;
    let n = state.cells();
    for (k, slot) in out.iter_mut().enumerate() {
        let lo = ((k as f64 - 0.5) * dr).max(0.0);
        let hi = (k as f64 + 0.5) * dr;
        while cell < n && state.radii[cell + 1] <= lo {
            cell += 1;
        }
        let mut mass = 0.0;
        let mut c = cell;
        while c < n && state.radii[c] < hi {
            let a = state.radii[c].max(lo);
            let b = state.radii[c + 1].min(hi);
            if b > a {
                mass += state.density[c] * measure(a, b);
            }
            c += 1;
        }
        *slot = mass / measure(lo, hi);
    }
    out
}

pub fn run_and_sample(
    setup: &ImplosionSetup,
    params: &EosParams,
    schedule: &SnapshotSchedule,
) -> Result<DensitySequence, HydroError> {
    let state = init_implosion(setup, params)?;
    let solver = Solver::new(MieGruneisen(*params), setup.solver_config());
    run_and_sample_with(&solver, state, schedule, setup.output_points, setup.cell_width())
}

pub fn run_and_sample_with<E: Eos>(
    solver: &Solver<E>,
    mut state: HydroState,
    schedule: &SnapshotSchedule,
    points: usize,
    dr: f64,
) -> Result<DensitySequence, HydroError> {
    schedule.validate()?;
    let mut data = Vec::with_capacity(points * schedule.count);
    for t in schedule.times() {
        solver.run_until(&mut state, t)?;
        data.extend(remap_to_grid(&state, points, dr));
    }
    Ok(DensitySequence::new(points, dr, schedule.times(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::IdealGas;

    #[test]
    fn nominal_shell_mass_is_exact() {
        let setup = ImplosionSetup::default();
        let state = init_implosion(&setup, &EosParams::nominal()).unwrap();
        let expected = 4.0 * PI / 3.0 * (1000.0 - 512.0) * 7.896;
        assert!((state.total_mass() - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn empty_shell_is_rejected() {
        let setup = ImplosionSetup {
            r_in_cm: 10.0,
            ..ImplosionSetup::default()
        };
        assert!(matches!(
            init_implosion(&setup, &EosParams::nominal()),
            Err(HydroError::InvalidSetup(_))
        ));
    }

    #[test]
    fn static_pressure_free_shell_is_a_fixed_point() {
        let params = EosParams::nominal();
        let setup = ImplosionSetup {
            v_impl_cm_per_us: 0.0,
            t_init_k: params.t0,
            ..ImplosionSetup::default()
        };
        let state = init_implosion(&setup, &params).unwrap();
        let next = advance(&state, &params, 0.1).unwrap();
        for (a, b) in state.radii.iter().zip(&next.radii) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in state.density.iter().zip(&next.density) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(next.velocities.iter().all(|u| u.abs() < 1e-14));
    }

    #[test]
    fn planar_uniform_gas_in_a_box_stays_put() {
        let n = 20;
        let radii: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let mut state = HydroState::from_cells(
            Geometry::Planar,
            radii.clone(),
            vec![0.0; n + 1],
            vec![1.0; n],
            vec![2.5; n],
        );
        let solver = Solver::new(IdealGas { gamma: 1.4 }, SolverConfig::default());
        solver.run_until(&mut state, 0.1).unwrap();
        for (a, b) in radii.iter().zip(&state.radii) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn timestep_collapse_is_reported() {
        let n = 10;
        let radii: Vec<f64> = (0..=n).map(|j| j as f64 * 1e-12).collect();
        let mut state = HydroState::from_cells(Geometry::Planar, radii, vec![0.0; n + 1], vec![1.0; n], vec![1.0; n]);
        let solver = Solver::new(IdealGas { gamma: 1.4 }, SolverConfig::default());
        assert!(matches!(
            solver.step(&mut state, 1.0),
            Err(HydroError::TimestepCollapse { .. })
        ));
    }

    #[test]
    fn remap_conserves_mass_when_grid_covers_shell() {
        let setup = ImplosionSetup::default();
        let state = init_implosion(&setup, &EosParams::nominal()).unwrap();
        let dr = setup.cell_width();
        let points = 420;
        let rho = remap_to_grid(&state, points, dr);
        let mass: f64 = rho
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let lo = ((k as f64 - 0.5) * dr).max(0.0);
                let hi = (k as f64 + 0.5) * dr;
                r * 4.0 * PI / 3.0 * (hi.powi(3) - lo.powi(3))
            })
            .sum();
        assert!((mass - state.total_mass()).abs() / state.total_mass() < 1e-12);
    }
}
