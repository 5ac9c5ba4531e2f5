//! Second BGK lattice Boltzmann solver: substrate advection–diffusion over a
//! frozen velocity field.
//!
//! Electrode and wall cells reflect the scalar distributions (zero flux).
//! Biofilm cells stay open to diffusion but carry no velocity, and remove
//! substrate through a per-cell sink.

use serde::{Deserialize, Serialize};

use crate::d2q9::{self, Propagator, Q};
use crate::error::{Error, Result};
use crate::grid::{CellKind, Lattice};

/// A concentration below `-(NEGATIVITY_FLOOR + NEGATIVITY_FRACTION * c_in)`
/// is treated as a numerical instability. Near `tau_d = 1/2` the scheme has
/// almost no numerical dissipation and shows bounded undershoots of a few
/// tenths of a percent of `c_in` in depleted pockets; a genuine instability
/// grows without bound.
pub const NEGATIVITY_FLOOR: f64 = 1e-9;
pub const NEGATIVITY_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdeParams {
    pub tau_d: f64,
    /// Dirichlet inlet concentration, mg/L.
    pub c_in: f64,
    /// Substrate half-saturation of the biofilm sink, mg/L. With a positive
    /// value the per-step removal is `sink · C/(C + K)` at the local
    /// concentration; zero gives a constant removal clamped at `C`.
    pub sink_half_saturation: f64,
    pub max_steps: usize,
    pub tolerance: f64,
    pub check_every: usize,
}

impl Default for AdeParams {
    fn default() -> Self {
        Self {
            tau_d: 0.5036,
            c_in: 410.0,
            sink_half_saturation: 0.0,
            max_steps: 2_000_000,
            tolerance: 1e-8,
            check_every: 100,
        }
    }
}

impl AdeParams {
    pub fn diffusivity(&self) -> f64 {
        (self.tau_d - 0.5) / 3.0
    }
}

#[inline]
pub fn ade_equilibrium(c: f64, u: [f64; 2]) -> [f64; Q] {
    d2q9::equilibrium(c, u)
}

/// Scalar distributions, nine per cell, cell-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarState {
    width: usize,
    height: usize,
    g: Vec<f64>,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl ScalarState {
    /// Uniform concentration at rest equilibrium in every cell.
    pub fn uniform(width: usize, height: usize, c: f64) -> Self {
        let geq = ade_equilibrium(c, [0.0; 2]);
        Self {
            width,
            height,
            g: geq.iter().copied().cycle().take(width * height * Q).collect(),
            scratch: vec![0.0; width * height * Q],
        }
    }

    /// Rest equilibrium of the given per-cell concentrations.
    pub fn from_concentration(width: usize, height: usize, conc: &[f64]) -> Result<Self> {
        if conc.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} concentrations for a {width}x{height} lattice",
                conc.len()
            )));
        }
        let mut g = Vec::with_capacity(conc.len() * Q);
        for &c in conc {
            g.extend_from_slice(&ade_equilibrium(c, [0.0; 2]));
        }
        Ok(Self {
            width,
            height,
            g,
            scratch: vec![0.0; width * height * Q],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, index: usize) -> &[f64] {
        &self.g[index * Q..(index + 1) * Q]
    }

    pub fn cell_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.g[index * Q..(index + 1) * Q]
    }

    pub fn distributions(&self) -> &[f64] {
        &self.g
    }

    pub fn concentration(&self, index: usize) -> f64 {
        self.cell(index).iter().sum()
    }

    /// Per-cell concentration; zero inside electrode and wall cells.
    pub fn concentrations(&self, lattice: &Lattice) -> Vec<f64> {
        lattice
            .kinds()
            .iter()
            .enumerate()
            .map(|(cell, kind)| {
                if kind.blocks_transport() {
                    0.0
                } else {
                    self.concentration(cell)
                }
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.g.iter().sum()
    }

    pub fn check_dims(&self, lattice: &Lattice) -> Result<()> {
        if self.width != lattice.width() || self.height != lattice.height() {
            return Err(Error::Dimension(format!(
                "scalar state {}x{} vs lattice {}x{}",
                self.width,
                self.height,
                lattice.width(),
                lattice.height()
            )));
        }
        Ok(())
    }
}

/// Converged concentration field with convergence metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationField {
    pub width: usize,
    pub height: usize,
    pub conc: Vec<f64>,
    pub steps: usize,
    pub residual: f64,
}

impl ConcentrationField {
    /// Mean over cells open to transport.
    pub fn mean_open(&self, lattice: &Lattice) -> f64 {
        let (mut sum, mut n) = (0.0, 0usize);
        for (c, kind) in self.conc.iter().zip(lattice.kinds()) {
            if !kind.blocks_transport() {
                sum += c;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

pub fn propagator(lattice: &Lattice) -> Propagator {
    Propagator::new(lattice, CellKind::blocks_transport)
}

/// Westward populations at the outlet arrive from beyond the domain. They
/// are copied from the upstream cell; behind a blocked upstream they are
/// rebuilt from the equilibrium of the cell's own concentration, solved
/// together with the known populations.
const UNKNOWN_AT_OUTLET: [usize; 3] = [3, 6, 7];
const KNOWN_AT_OUTLET: [usize; 6] = [0, 1, 2, 4, 5, 8];

/// Everything about one ADE configuration that stays fixed while it runs:
/// streaming tables, boundary cell lists and, since the velocity is frozen,
/// the equilibrium per unit concentration of every cell.
struct Kernel<'a> {
    prop: &'a Propagator,
    omega: f64,
    eq_unit: Vec<[f64; Q]>,
    inlet: Vec<usize>,
    /// Outlet cells with their upstream neighbour, when it is open.
    outlet: Vec<(usize, Option<usize>)>,
    biofilm: Vec<usize>,
    sink: &'a [f64],
    sink_half_saturation: f64,
    c_in: f64,
}

impl<'a> Kernel<'a> {
    fn new(
        lattice: &Lattice,
        prop: &'a Propagator,
        params: &AdeParams,
        velocity: &[[f64; 2]],
        sink: &'a [f64],
    ) -> Self {
        let kinds = lattice.kinds();
        let mut inlet = Vec::new();
        let mut outlet = Vec::new();
        let mut biofilm = Vec::new();
        for (cell, &kind) in kinds.iter().enumerate() {
            match kind {
                CellKind::Inlet => inlet.push(cell),
                CellKind::Outlet => {
                    let up = cell - 1;
                    outlet.push((cell, (!kinds[up].blocks_transport()).then_some(up)));
                }
                CellKind::Biofilm => biofilm.push(cell),
                _ => {}
            }
        }
        Self {
            prop,
            omega: 1.0 / params.tau_d,
            eq_unit: velocity.iter().map(|&u| ade_equilibrium(1.0, u)).collect(),
            inlet,
            outlet,
            biofilm,
            sink,
            sink_half_saturation: params.sink_half_saturation,
            c_in: params.c_in,
        }
    }

    fn step(&self, state: &mut ScalarState) {
        if state.scratch.len() != state.g.len() {
            state.scratch = vec![0.0; state.g.len()];
        }
        let omega = self.omega;
        let (src, dst) = (&state.g, &mut state.scratch);
        for cell in self.prop.active() {
            let g = &src[cell * Q..(cell + 1) * Q];
            let c: f64 = g.iter().sum();
            let a = &self.eq_unit[cell];
            for (i, &t) in self.prop.targets(cell).iter().enumerate() {
                dst[t as usize] = g[i] + omega * (c * a[i] - g[i]);
            }
        }
        std::mem::swap(&mut state.g, &mut state.scratch);
        self.prop.bounce_back(&mut state.g);

        let g = &mut state.g;
        for &cell in &self.inlet {
            for i in 0..Q {
                g[cell * Q + i] = self.c_in * self.eq_unit[cell][i];
            }
        }
        for &(cell, up) in &self.outlet {
            match up {
                // zero gradient: the unknowns are copied from upstream
                Some(u) => {
                    for &i in &UNKNOWN_AT_OUTLET {
                        g[cell * Q + i] = g[u * Q + i];
                    }
                }
                None => {
                    let cg = &mut g[cell * Q..(cell + 1) * Q];
                    let a = &self.eq_unit[cell];
                    let known: f64 = KNOWN_AT_OUTLET.iter().map(|&i| cg[i]).sum();
                    let open: f64 = UNKNOWN_AT_OUTLET.iter().map(|&i| a[i]).sum();
                    let c = known / (1.0 - open);
                    for &i in &UNKNOWN_AT_OUTLET {
                        cg[i] = c * a[i];
                    }
                }
            }
        }
        let k = self.sink_half_saturation;
        for &cell in &self.biofilm {
            let sink = self.sink[cell];
            if !(sink > 0.0) {
                continue;
            }
            let cg = &mut g[cell * Q..(cell + 1) * Q];
            let c: f64 = cg.iter().sum();
            // Monod removal `sink c / (c + k)` as a uniform rescale. Written
            // with |c| it also pulls small negative undershoots towards zero
            // instead of leaving a kink at c = 0.
            let scale = if k > 0.0 {
                (1.0 - sink / (k + c.abs())).max(0.0)
            } else if c > 0.0 {
                (c - sink).max(0.0) / c
            } else {
                continue;
            };
            cg.iter_mut().for_each(|gi| *gi *= scale);
        }
    }

    /// Fails on a concentration below the instability threshold.
    fn check(&self, state: &ScalarState, lattice: &Lattice) -> Result<()> {
        let floor = -(NEGATIVITY_FLOOR + NEGATIVITY_FRACTION * self.c_in);
        for cell in self.prop.active() {
            let c = state.concentration(cell);
            if !(c >= floor) {
                let site = lattice.site(cell);
                return Err(Error::Blowup {
                    solver: "ade",
                    x: site.x,
                    y: site.y,
                    detail: format!("concentration {c}"),
                });
            }
        }
        Ok(())
    }
}

/// One ADE step: collision and streaming, zero-flux reflection at electrode
/// and wall cells, Dirichlet inlet, zero-gradient outlet, biofilm sink.
///
/// `velocity` is in ADE lattice units and must be zero at biofilm cells.
/// `sink` is the substrate removed per step at each cell (mg/L); only
/// biofilm entries are read.
pub fn ade_step(
    state: &mut ScalarState,
    lattice: &Lattice,
    prop: &Propagator,
    params: &AdeParams,
    velocity: &[[f64; 2]],
    sink: &[f64],
) -> Result<()> {
    state.check_dims(lattice)?;
    let kernel = Kernel::new(lattice, prop, params, velocity, sink);
    kernel.step(state);
    kernel.check(state, lattice)
}

/// Iterates the ADE until the relative L2 change of the concentration
/// between checks drops below `params.tolerance`. The returned field is
/// clipped at zero; the distributions are left untouched.
pub fn run_to_steady_ade(
    lattice: &Lattice,
    params: &AdeParams,
    velocity: &[[f64; 2]],
    sink: &[f64],
    state: &mut ScalarState,
) -> Result<ConcentrationField> {
    state.check_dims(lattice)?;
    let n = lattice.len();
    if velocity.len() != n || sink.len() != n {
        return Err(Error::Dimension(format!(
            "velocity/sink fields of length {}/{} for {n} cells",
            velocity.len(),
            sink.len()
        )));
    }
    for (cell, kind) in lattice.kinds().iter().enumerate() {
        if kind.blocks_transport() {
            state.cell_mut(cell).fill(0.0);
        }
    }
    let prop = propagator(lattice);
    let kernel = Kernel::new(lattice, &prop, params, velocity, sink);
    let mut previous = state.concentrations(lattice);
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    while steps < params.max_steps {
        for _ in 0..params.check_every {
            kernel.step(state);
        }
        steps += params.check_every;
        kernel.check(state, lattice)?;
        let current = state.concentrations(lattice);
        residual = relative_change(&previous, &current);
        previous = current;
        if residual < params.tolerance {
            for c in &mut previous {
                *c = c.max(0.0);
            }
            return Ok(ConcentrationField {
                width: lattice.width(),
                height: lattice.height(),
                conc: previous,
                steps,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "ade",
        steps,
        residual,
    })
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (a, b) in old.iter().zip(new) {
        diff += (b - a) * (b - a);
        norm += b * b;
    }
    if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    }
}
