use super::riemann::{sample, sod_left, sod_right};
use hydrorad::eos::IdealGas;
use hydrorad::hydro::{Geometry, HydroState, Solver, SolverConfig};

/// Relative L1 errors (density, velocity, pressure) of the planar Sod problem at t = 0.2.
pub fn sod_errors(cells: usize) -> (f64, f64, f64) {
    let gamma = 1.4;
    let (l, r) = (sod_left(), sod_right());
    let radii: Vec<f64> = (0..=cells).map(|j| j as f64 / cells as f64).collect();
    let centers: Vec<f64> = radii.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let density: Vec<f64> = centers.iter().map(|&x| if x < 0.5 { l.rho } else { r.rho }).collect();
    let energy: Vec<f64> = centers
        .iter()
        .map(|&x| {
            let s = if x < 0.5 { l } else { r };
            s.p / ((gamma - 1.0) * s.rho)
        })
        .collect();
    let mut state = HydroState::from_cells(Geometry::Planar, radii, vec![0.0; cells + 1], density, energy);
    let solver = Solver::new(IdealGas { gamma }, SolverConfig::default());
    solver.run_until(&mut state, 0.2).unwrap();

    let (mut er, mut eu, mut ep) = (0.0, 0.0, 0.0);
    let (mut nr, mut nu, mut np) = (0.0, 0.0, 0.0);
    for i in 0..state.cells() {
        let x = 0.5 * (state.radii[i] + state.radii[i + 1]);
        let dx = state.radii[i + 1] - state.radii[i];
        let exact = sample(l, r, gamma, (x - 0.5) / 0.2);
        let u = 0.5 * (state.velocities[i] + state.velocities[i + 1]);
        let p = (gamma - 1.0) * state.density[i] * state.energy[i];
        er += (state.density[i] - exact.rho).abs() * dx;
        eu += (u - exact.u).abs() * dx;
        ep += (p - exact.p).abs() * dx;
        nr += exact.rho * dx;
        nu += exact.u.abs() * dx;
        np += exact.p * dx;
    }
    (er / nr, eu / nu, ep / np)
}
