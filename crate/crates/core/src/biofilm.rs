//! Agent-based biofilm: attachment on the electrode front, Monod growth and
//! threshold-triggered spreading.
//!
//! Biomass lives only in `Biofilm` cells. Each cell carries a biomass
//! concentration (mg/L) and an oxidised-mediator content per unit biomass.
//! A fluid cell is only colonised if the flow keeps an inlet-to-outlet path
//! afterwards.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::electrochem::{monod_rate, ElectroParams};
use crate::error::{Error, Result};
use crate::grid::{CellKind, Lattice, Site};

/// Which fluid cells are candidates for attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachFront {
    /// Fluid cells face-adjacent to the bare electrode.
    #[default]
    Electrode,
    /// Fluid cells face-adjacent to electrode or biofilm.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiofilmParams {
    /// cells colonised per hour
    pub k_ata: u32,
    /// mg/L
    #[serde(rename = "C0_bio")]
    pub c0_bio: f64,
    /// mg/L
    #[serde(rename = "Cmax_bio")]
    pub cmax_bio: f64,
    /// fraction of an over-threshold cell moved when it spreads
    pub fr_spr: f64,
    /// growth yield, mg biomass / mg substrate
    #[serde(rename = "Y_g")]
    pub y_g: f64,
    pub attach_front: AttachFront,
}

impl Default for BiofilmParams {
    fn default() -> Self {
        Self {
            k_ata: 200,
            c0_bio: 450.0,
            cmax_bio: 512.5,
            fr_spr: 0.4,
            y_g: 0.1,
            attach_front: AttachFront::Electrode,
        }
    }
}

impl BiofilmParams {
    pub fn validate(&self, section: &str) -> Result<()> {
        for (key, value) in [("C0_bio", self.c0_bio), ("Cmax_bio", self.cmax_bio)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(
                    format!("{section}.{key}"),
                    format!("must be a positive number, got {value}"),
                ));
            }
        }
        if !(self.fr_spr > 0.0 && self.fr_spr < 1.0) {
            return Err(Error::config(
                format!("{section}.fr_spr"),
                format!("must lie in (0, 1), got {}", self.fr_spr),
            ));
        }
        if !(self.y_g >= 0.0 && self.y_g.is_finite()) {
            return Err(Error::config(
                format!("{section}.Y_g"),
                format!("must be non-negative, got {}", self.y_g),
            ));
        }
        if self.c0_bio > self.cmax_bio {
            return Err(Error::config(
                format!("{section}.C0_bio"),
                "must not exceed Cmax_bio",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiofilmState {
    width: usize,
    height: usize,
    /// Biomass concentration per cell, mg/L.
    pub c_bio: Vec<f64>,
    /// Oxidised mediator per unit biomass, mg/mg.
    pub m_ox: Vec<f64>,
}

impl BiofilmState {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            c_bio: vec![0.0; width * height],
            m_ox: vec![0.0; width * height],
        }
    }

    /// State matching a lattice that may already contain biofilm cells;
    /// those start at `c0` with fully oxidised mediator.
    pub fn for_lattice(lattice: &Lattice, c0: f64, m_total: f64) -> Self {
        let mut state = Self::empty(lattice.width(), lattice.height());
        for (cell, &kind) in lattice.kinds().iter().enumerate() {
            if kind == CellKind::Biofilm {
                state.c_bio[cell] = c0;
                state.m_ox[cell] = m_total;
            }
        }
        state
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum of biomass concentrations over all cells (mg/L summed).
    pub fn total_concentration(&self) -> f64 {
        self.c_bio.iter().sum()
    }

    /// Sum of `c_bio * m_ox`, proportional to the total mediator mass.
    pub fn total_mediator(&self) -> f64 {
        self.c_bio.iter().zip(&self.m_ox).map(|(c, m)| c * m).sum()
    }

    pub fn occupied(&self) -> usize {
        self.c_bio.iter().filter(|&&c| c > 0.0).count()
    }

    pub fn check_dims(&self, lattice: &Lattice) -> Result<()> {
        if self.width != lattice.width() || self.height != lattice.height() {
            return Err(Error::Dimension(format!(
                "biofilm state {}x{} vs lattice {}x{}",
                self.width,
                self.height,
                lattice.width(),
                lattice.height()
            )));
        }
        Ok(())
    }

    fn take(&mut self, cell: usize) -> (f64, f64) {
        let content = (self.c_bio[cell], self.m_ox[cell]);
        self.c_bio[cell] = 0.0;
        self.m_ox[cell] = 0.0;
        content
    }

    fn put(&mut self, cell: usize, content: (f64, f64)) {
        self.c_bio[cell] = content.0;
        self.m_ox[cell] = content.1;
    }
}

/// A fluid cell that may be colonised without cutting the flow path.
fn is_free(lattice: &Lattice, site: Site) -> bool {
    lattice.kind(site) == CellKind::Fluid && !cuts_flow_path(lattice, site)
}

fn cuts_flow_path(lattice: &Lattice, site: Site) -> bool {
    lattice.has_inlet() && !lattice.percolates_without(site)
}

fn colonise(lattice: &mut Lattice, site: Site) {
    lattice.set_kind(site, CellKind::Biofilm);
}

/// Attachment candidates in row-major order.
pub fn attach_candidates(lattice: &Lattice, front: AttachFront) -> Vec<Site> {
    let mut cells = lattice.interface_cells();
    if front == AttachFront::Electrode {
        cells.retain(|&s| {
            lattice
                .neighbours4(s)
                .any(|n| lattice.kind(n) == CellKind::ElectrodeSolid)
        });
    }
    cells
}

/// Colonises up to `k_ata` candidate cells chosen uniformly at random.
/// Returns the number of new biofilm cells.
///
/// Candidates come from the front as it stood before the pass, visited in a
/// random order; a candidate whose colonisation would disconnect the inlet
/// from the outlet is skipped.
pub fn attach<R: Rng + ?Sized>(
    lattice: &mut Lattice,
    state: &mut BiofilmState,
    params: &BiofilmParams,
    m_total: f64,
    rng: &mut R,
) -> Result<usize> {
    state.check_dims(lattice)?;
    let front = attach_candidates(lattice, params.attach_front);
    let want = params.k_ata as usize;
    if front.is_empty() || want == 0 {
        return Ok(0);
    }
    let order = index::sample(rng, front.len(), front.len());
    let mut placed = 0;
    for i in order.iter() {
        if placed == want {
            break;
        }
        let site = front[i];
        if cuts_flow_path(lattice, site) {
            continue;
        }
        colonise(lattice, site);
        let cell = lattice.index(site);
        state.put(cell, (params.c0_bio, m_total));
        placed += 1;
    }
    Ok(placed)
}

/// Per-cell consumption rate from the local substrate and mediator, per
/// day. Zero outside biofilm.
pub fn consumption_rates(state: &BiofilmState, conc: &[f64], p: &ElectroParams) -> Vec<f64> {
    state
        .c_bio
        .iter()
        .zip(&state.m_ox)
        .zip(conc)
        .map(|((&c, &m), &cs)| if c > 0.0 { monod_rate(cs, m, p) } else { 0.0 })
        .collect()
}

/// Growth over `dt_h` hours: `C_bio <- C_bio (1 + Y_g q dt/24)`. The
/// mediator content per unit biomass is unchanged, so the pool grows with
/// the biomass.
pub fn grow(state: &mut BiofilmState, q: &[f64], params: &BiofilmParams, dt_h: f64) {
    for (c, &qc) in state.c_bio.iter_mut().zip(q) {
        if *c > 0.0 {
            *c *= 1.0 + params.y_g * qc * dt_h / 24.0;
        }
    }
}

/// Longest random walk allowed, ten times the lattice perimeter.
pub fn max_walk_steps(lattice: &Lattice) -> usize {
    10 * 2 * (lattice.width() + lattice.height())
}

/// Resolves every cell above `cmax_bio`, row-major, repeating until none
/// remain. Returns the number of spreading events.
///
/// An over-threshold cell tries its open directions (fluid or biofilm
/// neighbours) in random order. A free fluid neighbour receives `fr_spr` of
/// the biomass directly. A biofilm neighbour whose side of the biofilm has
/// room starts a loop-erased random walk through biofilm until some walked
/// cell touches a free fluid cell; every cell on
/// the path then hands its contents one step outward, which empties the
/// first cell of the path for the transfer. Biomass and mediator are only
/// moved, never created.
pub fn spread<R: Rng + ?Sized>(
    lattice: &mut Lattice,
    state: &mut BiofilmState,
    params: &BiofilmParams,
    rng: &mut R,
) -> Result<usize> {
    state.check_dims(lattice)?;
    let max_walk = max_walk_steps(lattice);
    let mut events = 0;
    loop {
        let over: Vec<usize> = (0..state.c_bio.len())
            .filter(|&c| state.c_bio[c] > params.cmax_bio)
            .collect();
        if over.is_empty() {
            return Ok(events);
        }
        for cell in over {
            if state.c_bio[cell] <= params.cmax_bio {
                continue;
            }
            spread_one(lattice, state, params, cell, max_walk, rng)?;
            events += 1;
        }
    }
}

fn spread_one<R: Rng + ?Sized>(
    lattice: &mut Lattice,
    state: &mut BiofilmState,
    params: &BiofilmParams,
    cell: usize,
    max_walk: usize,
    rng: &mut R,
) -> Result<()> {
    let origin = lattice.site(cell);
    let open: Vec<Site> = lattice
        .neighbours4(origin)
        .filter(|&n| matches!(lattice.kind(n), CellKind::Fluid | CellKind::Biofilm))
        .collect();
    if open.is_empty() {
        return Err(Error::Clogged {
            x: origin.x,
            y: origin.y,
            steps: 0,
        });
    }
    // directions in random order; the first one with room wins
    let mut open = open;
    let mut target = None;
    while !open.is_empty() {
        let next = open.swap_remove(rng.gen_range(0..open.len()));
        if lattice.kind(next) == CellKind::Fluid {
            if is_free(lattice, next) {
                colonise(lattice, next);
                target = Some(next);
                break;
            }
        } else if reaches_free(lattice, origin, next) {
            make_room(lattice, state, origin, next, max_walk, rng)?;
            target = Some(next);
            break;
        }
    }
    let Some(target) = target else {
        return Err(Error::Clogged {
            x: origin.x,
            y: origin.y,
            steps: 0,
        });
    };

    let moved = params.fr_spr * state.c_bio[cell];
    let m_ox = state.m_ox[cell];
    state.c_bio[cell] -= moved;
    state.put(lattice.index(target), (moved, m_ox));
    Ok(())
}

/// Whether the biofilm reachable from `start` without crossing `origin`
/// touches a free fluid cell.
fn reaches_free(lattice: &Lattice, origin: Site, start: Site) -> bool {
    let mut seen = vec![false; lattice.len()];
    seen[lattice.index(origin)] = true;
    seen[lattice.index(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(here) = queue.pop_front() {
        for n in lattice.neighbours4(here) {
            let i = lattice.index(n);
            if seen[i] {
                continue;
            }
            seen[i] = true;
            match lattice.kind(n) {
                CellKind::Fluid if is_free(lattice, n) => return true,
                CellKind::Biofilm => queue.push_back(n),
                _ => {}
            }
        }
    }
    false
}

/// Walks from `start` (a biofilm neighbour of `origin`) through biofilm
/// until a cell next to a free fluid cell is found, then shifts the contents
/// along the loop-erased path so that `start` ends up empty.
fn make_room<R: Rng + ?Sized>(
    lattice: &mut Lattice,
    state: &mut BiofilmState,
    origin: Site,
    start: Site,
    max_walk: usize,
    rng: &mut R,
) -> Result<()> {
    let mut path = vec![start];
    let mut steps = 0;
    let free = loop {
        let here = *path.last().expect("walk path is never empty");
        let free: Vec<Site> = lattice
            .neighbours4(here)
            .filter(|&n| is_free(lattice, n))
            .collect();
        if !free.is_empty() {
            break free[rng.gen_range(0..free.len())];
        }
        if steps >= max_walk {
            return Err(Error::Clogged {
                x: origin.x,
                y: origin.y,
                steps,
            });
        }
        let next: Vec<Site> = lattice
            .neighbours4(here)
            .filter(|&n| n != origin && lattice.kind(n) == CellKind::Biofilm)
            .collect();
        if next.is_empty() {
            // dead end: step back, or give up at the start
            if path.len() == 1 {
                return Err(Error::Clogged {
                    x: origin.x,
                    y: origin.y,
                    steps,
                });
            }
            path.pop();
        } else {
            let step = next[rng.gen_range(0..next.len())];
            match path.iter().position(|&s| s == step) {
                Some(loop_start) => path.truncate(loop_start + 1),
                None => path.push(step),
            }
        }
        steps += 1;
    };

    colonise(lattice, free);
    let mut dest = lattice.index(free);
    for &site in path.iter().rev() {
        let from = lattice.index(site);
        let content = state.take(from);
        state.put(dest, content);
        dest = from;
    }
    Ok(())
}
