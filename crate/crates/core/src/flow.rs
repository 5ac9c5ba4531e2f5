//! BGK lattice Boltzmann solver for the steady pore-space velocity field.
//!
//! Electrode, biofilm and wall cells are impermeable obstacles handled by
//! half-way bounce-back. The inlet column imposes a fixed velocity by
//! equilibrium refill; the outlet column copies its upstream neighbour.

use serde::{Deserialize, Serialize};

use crate::d2q9::{self, Propagator, Q, VELOCITIES, WEIGHTS};
use crate::error::{Error, Result};
use crate::grid::{CellKind, Lattice, Site};

/// Velocities above this magnitude leave the low-Mach regime.
pub const MACH_GUARD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub tau: f64,
    /// Inlet velocity along +x, lattice units.
    pub inflow_velocity: f64,
    /// Uniform body force per unit volume, lattice units. Zero for the
    /// compartment; used by the periodic channel benchmark.
    pub body_force: [f64; 2],
    pub max_steps: usize,
    pub tolerance: f64,
    pub check_every: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            tau: 0.6706,
            inflow_velocity: 0.0,
            body_force: [0.0, 0.0],
            max_steps: 1_000_000,
            tolerance: 1e-8,
            check_every: 100,
        }
    }
}

impl FlowParams {
    pub fn viscosity(&self) -> f64 {
        (self.tau - 0.5) / 3.0
    }
}

/// Distribution functions of the flow solver, nine per cell, cell-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    width: usize,
    height: usize,
    f: Vec<f64>,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl FlowState {
    /// Fluid at rest with unit density everywhere.
    pub fn new(width: usize, height: usize) -> Self {
        Self::uniform(width, height, 1.0, [0.0, 0.0])
    }

    pub fn uniform(width: usize, height: usize, density: f64, u: [f64; 2]) -> Self {
        let feq = d2q9::equilibrium(density, u);
        let f = feq.iter().copied().cycle().take(width * height * Q).collect();
        Self {
            width,
            height,
            f,
            scratch: vec![0.0; width * height * Q],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, index: usize) -> &[f64] {
        &self.f[index * Q..(index + 1) * Q]
    }

    pub fn cell_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.f[index * Q..(index + 1) * Q]
    }

    pub fn distributions(&self) -> &[f64] {
        &self.f
    }

    pub fn check_dims(&self, lattice: &Lattice) -> Result<()> {
        if self.width != lattice.width() || self.height != lattice.height() {
            return Err(Error::Dimension(format!(
                "flow state {}x{} vs lattice {}x{}",
                self.width,
                self.height,
                lattice.width(),
                lattice.height()
            )));
        }
        Ok(())
    }

    /// Sum of all distributions; the total lattice mass.
    pub fn total_mass(&self) -> f64 {
        self.f.iter().sum()
    }

    pub fn total_momentum(&self) -> [f64; 2] {
        let mut j = [0.0; 2];
        for cell in self.f.chunks_exact(Q) {
            let (_, jc) = d2q9::moments(cell);
            j[0] += jc[0];
            j[1] += jc[1];
        }
        j
    }
}

/// Macroscopic density and velocity per cell, plus convergence metadata
/// when produced by [`run_to_steady`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 2]>,
    pub steps: usize,
    pub residual: f64,
}

impl FlowField {
    pub fn at_rest(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rho: vec![1.0; width * height],
            u: vec![[0.0; 2]; width * height],
            steps: 0,
            residual: 0.0,
        }
    }

    pub fn velocity(&self, site: Site) -> [f64; 2] {
        self.u[site.y * self.width + site.x]
    }

    pub fn max_speed(&self) -> f64 {
        self.u
            .iter()
            .map(|u| (u[0] * u[0] + u[1] * u[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn propagator(lattice: &Lattice) -> Propagator {
    Propagator::new(lattice, CellKind::blocks_flow)
}

/// BGK relaxation at every open cell followed by streaming into the second
/// buffer. Populations headed into obstacles stay parked there until
/// [`apply_bounce_back`].
pub fn collide_and_stream(state: &mut FlowState, prop: &Propagator, params: &FlowParams) {
    if state.scratch.len() != state.f.len() {
        state.scratch = vec![0.0; state.f.len()];
    }
    let relax = Relaxation::new(params);
    let mut post = [0.0; Q];
    for cell in prop.active() {
        post.copy_from_slice(&state.f[cell * Q..(cell + 1) * Q]);
        relax.apply(&mut post);
        for (i, &t) in prop.targets(cell).iter().enumerate() {
            state.scratch[t as usize] = post[i];
        }
    }
    std::mem::swap(&mut state.f, &mut state.scratch);
}

struct Relaxation {
    omega: f64,
    force: [f64; 2],
    forced: bool,
}

impl Relaxation {
    fn new(params: &FlowParams) -> Self {
        Self {
            omega: 1.0 / params.tau,
            force: params.body_force,
            forced: params.body_force != [0.0, 0.0],
        }
    }

    /// BGK collision of one cell, with Guo forcing when a body force is set.
    #[inline]
    fn apply(&self, f: &mut [f64; Q]) {
        let omega = self.omega;
        let g = self.force;
        let (rho, j) = d2q9::moments(f);
        let u = [(j[0] + 0.5 * g[0]) / rho, (j[1] + 0.5 * g[1]) / rho];
        let feq = d2q9::equilibrium(rho, u);
        if self.forced {
            let prefactor = 1.0 - 0.5 * omega;
            for i in 0..Q {
                let cx = VELOCITIES[i][0] as f64;
                let cy = VELOCITIES[i][1] as f64;
                let cu = cx * u[0] + cy * u[1];
                let source = prefactor
                    * WEIGHTS[i]
                    * (3.0 * ((cx - u[0]) * g[0] + (cy - u[1]) * g[1])
                        + 9.0 * cu * (cx * g[0] + cy * g[1]));
                f[i] += omega * (feq[i] - f[i]) + source;
            }
        } else {
            for i in 0..Q {
                f[i] += omega * (feq[i] - f[i]);
            }
        }
    }
}

/// Half-way bounce-back: reflects populations parked in obstacle cells back
/// to the open cell they left, reversed.
pub fn apply_bounce_back(state: &mut FlowState, prop: &Propagator) {
    prop.bounce_back(&mut state.f);
}

/// Velocity inlet by equilibrium refill at the local (Zou-He) density.
/// Inlet cells not flagged in `fed` face a dead-end pocket and get zero
/// velocity instead, which keeps the pocket's mass bounded.
///
/// The outlet is zero-gradient in velocity and in the non-equilibrium part
/// of the distributions, copied from the upstream neighbour, with the
/// density held at the reference value 1.
pub fn apply_inlet_outlet(state: &mut FlowState, lattice: &Lattice, inflow_velocity: f64, fed: &[bool]) {
    let w = lattice.width();
    let kinds = lattice.kinds();
    for (cell, &kind) in kinds.iter().enumerate() {
        match kind {
            CellKind::Inlet => {
                let v = if fed[cell] { inflow_velocity } else { 0.0 };
                let f = &mut state.f[cell * Q..(cell + 1) * Q];
                // populations 0, 2, 4 and the westward 3, 6, 7 are known
                let rho = (f[0] + f[2] + f[4] + 2.0 * (f[3] + f[6] + f[7]))
                    / (1.0 - v);
                f.copy_from_slice(&d2q9::equilibrium(rho, [v, 0.0]));
            }
            CellKind::Outlet => {
                if cell % w == 0 || kinds[cell - 1].blocks_flow() {
                    state.f[cell * Q..(cell + 1) * Q].copy_from_slice(&WEIGHTS);
                    continue;
                }
                let mut upstream = [0.0; Q];
                upstream.copy_from_slice(state.cell(cell - 1));
                let (rho_up, j) = d2q9::moments(&upstream);
                let u = [j[0] / rho_up, j[1] / rho_up];
                let feq_up = d2q9::equilibrium(rho_up, u);
                let feq_out = d2q9::equilibrium(1.0, u);
                let f = state.cell_mut(cell);
                for i in 0..Q {
                    f[i] = feq_out[i] + (upstream[i] - feq_up[i]);
                }
            }
            _ => {}
        }
    }
}

/// Density and velocity per cell. Obstacles report zero density and zero
/// velocity. The half-force shift only matters for the forced benchmark.
pub fn macroscopic(state: &FlowState, lattice: &Lattice, body_force: [f64; 2]) -> Result<FlowField> {
    state.check_dims(lattice)?;
    let n = lattice.len();
    let mut rho = vec![0.0; n];
    let mut u = vec![[0.0; 2]; n];
    for (cell, &kind) in lattice.kinds().iter().enumerate() {
        if kind.blocks_flow() {
            continue;
        }
        let (r, j) = d2q9::moments(state.cell(cell));
        if !(r > 0.0) || !r.is_finite() {
            let site = lattice.site(cell);
            return Err(Error::Blowup {
                solver: "flow",
                x: site.x,
                y: site.y,
                detail: format!("density {r}"),
            });
        }
        rho[cell] = r;
        u[cell] = [(j[0] + 0.5 * body_force[0]) / r, (j[1] + 0.5 * body_force[1]) / r];
    }
    Ok(FlowField {
        width: lattice.width(),
        height: lattice.height(),
        rho,
        u,
        steps: 0,
        residual: 0.0,
    })
}

/// One complete time step.
pub fn step(state: &mut FlowState, lattice: &Lattice, prop: &Propagator, params: &FlowParams) {
    step_fed(state, lattice, prop, params, &lattice.fed_inlets());
}

fn step_fed(state: &mut FlowState, lattice: &Lattice, prop: &Propagator, params: &FlowParams, fed: &[bool]) {
    collide_and_stream(state, prop, params);
    apply_bounce_back(state, prop);
    apply_inlet_outlet(state, lattice, params.inflow_velocity, fed);
}

/// Prepares a (possibly warm-started) state for a changed obstacle set:
/// newly blocked cells drop their populations, newly opened cells start
/// from rest equilibrium.
pub fn refresh_obstacles(state: &mut FlowState, lattice: &Lattice) {
    for (cell, &kind) in lattice.kinds().iter().enumerate() {
        let f = state.cell_mut(cell);
        if kind.blocks_flow() {
            f.fill(0.0);
        } else if f.iter().sum::<f64>() <= 0.0 {
            f.copy_from_slice(&WEIGHTS);
        }
    }
}

/// Iterates until the relative L2 change of the velocity between checks
/// falls below `params.tolerance`.
pub fn run_to_steady(
    lattice: &Lattice,
    params: &FlowParams,
    state: &mut FlowState,
) -> Result<FlowField> {
    state.check_dims(lattice)?;
    if lattice.has_inlet() && !lattice.percolates() {
        return Err(Error::NotPercolating);
    }
    refresh_obstacles(state, lattice);
    let prop = propagator(lattice);
    let fed = lattice.fed_inlets();
    let mut previous = macroscopic(state, lattice, params.body_force)?;
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    while steps < params.max_steps {
        for _ in 0..params.check_every {
            step_fed(state, lattice, &prop, params, &fed);
        }
        steps += params.check_every;
        let current = macroscopic(state, lattice, params.body_force)?;
        guard_velocity(&current, lattice)?;
        residual = relative_change(&previous.u, &current.u);
        previous = current;
        if residual < params.tolerance {
            previous.steps = steps;
            previous.residual = residual;
            return Ok(previous);
        }
    }
    Err(Error::NonConvergence {
        solver: "flow",
        steps,
        residual,
    })
}

fn guard_velocity(field: &FlowField, lattice: &Lattice) -> Result<()> {
    for (cell, u) in field.u.iter().enumerate() {
        let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
        if !(speed < MACH_GUARD) {
            let site = lattice.site(cell);
            return Err(Error::Blowup {
                solver: "flow",
                x: site.x,
                y: site.y,
                detail: format!("speed {speed} beyond low-Mach limit {MACH_GUARD}"),
            });
        }
    }
    Ok(())
}

/// `||new - old|| / ||new||`, or the absolute change when `new` is zero.
pub(crate) fn relative_change(old: &[[f64; 2]], new: &[[f64; 2]]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (a, b) in old.iter().zip(new) {
        diff += (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
        norm += b[0] * b[0] + b[1] * b[1];
    }
    if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Site;

    fn periodic(width: usize, height: usize) -> Lattice {
        Lattice::filled(width, height, CellKind::Fluid)
    }

    #[test]
    fn equilibrium_is_fixed_point_on_periodic_domain() {
        let lattice = periodic(8, 6);
        let mut state = FlowState::uniform(8, 6, 1.0, [0.03, -0.01]);
        let before = state.clone();
        let prop = propagator(&lattice);
        step(&mut state, &lattice, &prop, &FlowParams::default());
        for (a, b) in before.f.iter().zip(&state.f) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_tau_relaxes_fully() {
        let odd = [0.5, 0.1, 0.12, 0.08, 0.1, 0.03, 0.02, 0.025, 0.03];
        let params = FlowParams {
            tau: 1.0,
            ..FlowParams::default()
        };
        let mut post = odd;
        Relaxation::new(&params).apply(&mut post);
        let (rho, j) = d2q9::moments(&odd);
        let feq = d2q9::equilibrium(rho, [j[0] / rho, j[1] / rho]);
        for i in 0..Q {
            assert!((post[i] - feq[i]).abs() < 1e-16);
        }
    }

    #[test]
    fn south_wall_reflection() {
        // wall row y = 0; the fluid cell above sends population 7 into it
        let lattice = Lattice::from_mask("WWWW\n....\n....\nWWWW\n").unwrap();
        let prop = propagator(&lattice);
        let mut state = FlowState::new(4, 4);
        let cell = lattice.index(Site::new(2, 1));
        state.cell_mut(cell)[7] = 0.2;
        // stream without colliding
        let mut next = state.f.clone();
        prop.stream(&state.f, &mut next);
        state.f = next;
        apply_bounce_back(&mut state, &prop);
        assert_eq!(state.cell(cell)[5], 0.2);
    }

    #[test]
    fn bounce_back_without_obstacles_is_identity() {
        let lattice = periodic(6, 4);
        let prop = propagator(&lattice);
        let mut state = FlowState::uniform(6, 4, 1.1, [0.02, 0.01]);
        state.cell_mut(3)[2] = 0.7;
        let before = state.clone();
        apply_bounce_back(&mut state, &prop);
        assert_eq!(before, state);
    }

    #[test]
    fn macroscopic_of_weights() {
        let lattice = periodic(3, 3);
        let state = FlowState::new(3, 3);
        let field = macroscopic(&state, &lattice, [0.0; 2]).unwrap();
        for (r, u) in field.rho.iter().zip(&field.u) {
            assert!((r - 1.0).abs() < 1e-15);
            assert!(u[0].abs() < 1e-16 && u[1].abs() < 1e-16);
        }
    }

    #[test]
    fn swapping_east_west_flips_ux() {
        let lattice = periodic(1, 1);
        let mut state = FlowState::new(1, 1);
        state.cell_mut(0)[1] = 0.2;
        state.cell_mut(0)[3] = 0.05;
        let ux = macroscopic(&state, &lattice, [0.0; 2]).unwrap().u[0][0];
        state.cell_mut(0).swap(1, 3);
        let flipped = macroscopic(&state, &lattice, [0.0; 2]).unwrap().u[0][0];
        assert!(ux > 0.0);
        assert!((ux + flipped).abs() < 1e-16);
    }

    #[test]
    fn non_positive_density_names_cell() {
        let lattice = periodic(4, 4);
        let mut state = FlowState::new(4, 4);
        state.cell_mut(6).fill(0.0);
        match macroscopic(&state, &lattice, [0.0; 2]) {
            Err(Error::Blowup { x, y, .. }) => assert_eq!((x, y), (2, 1)),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn blocked_inlet_rejected() {
        let mut lattice = Lattice::channel(10, 6);
        for y in 1..5 {
            lattice.set_kind(Site::new(1, y), CellKind::ElectrodeSolid);
        }
        let mut state = FlowState::new(10, 6);
        assert!(matches!(
            run_to_steady(&lattice, &FlowParams::default(), &mut state),
            Err(Error::NotPercolating)
        ));
    }

    #[test]
    fn zero_inflow_stays_at_rest() {
        let lattice = crate::grid::generate_random_electrode(20, 15, 0.85, 4).unwrap();
        let mut state = FlowState::new(20, 15);
        let field = run_to_steady(&lattice, &FlowParams::default(), &mut state).unwrap();
        assert!(field.max_speed() < 1e-14);
    }

    #[test]
    fn obstacle_velocity_is_zero() {
        let lattice = crate::grid::generate_random_electrode(24, 16, 0.85, 9).unwrap();
        let params = FlowParams {
            inflow_velocity: 0.01,
            ..FlowParams::default()
        };
        let mut state = FlowState::new(24, 16);
        let field = run_to_steady(&lattice, &params, &mut state).unwrap();
        for (cell, kind) in lattice.kinds().iter().enumerate() {
            if kind.blocks_flow() {
                assert_eq!(field.u[cell], [0.0, 0.0]);
            }
        }
        assert!(field.max_speed() > 0.0);
    }
}
