//! Discrete domain: cell classification, electrode geometry and front queries.
//!
//! Coordinates are `(x, y)` with `x` along the flow direction (inlet at
//! `x = 0`, outlet at `x = width - 1`) and `y` across the compartment (walls
//! at `y = 0` and `y = height - 1`). Cells are stored row-major, `y * width + x`.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Fluid,
    ElectrodeSolid,
    Biofilm,
    Wall,
    Inlet,
    Outlet,
}

impl CellKind {
    pub const fn to_char(self) -> char {
        match self {
            CellKind::Fluid => '.',
            CellKind::ElectrodeSolid => '#',
            CellKind::Biofilm => 'B',
            CellKind::Wall => 'W',
            CellKind::Inlet => 'I',
            CellKind::Outlet => 'O',
        }
    }

    pub const fn from_char(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellKind::Fluid),
            '#' => Some(CellKind::ElectrodeSolid),
            'B' => Some(CellKind::Biofilm),
            'W' => Some(CellKind::Wall),
            'I' => Some(CellKind::Inlet),
            'O' => Some(CellKind::Outlet),
            _ => None,
        }
    }

    /// Impermeable to the fluid flow (bounce-back in the flow solver).
    pub const fn blocks_flow(self) -> bool {
        matches!(
            self,
            CellKind::ElectrodeSolid | CellKind::Biofilm | CellKind::Wall
        )
    }

    /// Impermeable to substrate transport (zero-flux in the scalar solver).
    /// Biofilm is not here: substrate diffuses into it.
    pub const fn blocks_transport(self) -> bool {
        matches!(self, CellKind::ElectrodeSolid | CellKind::Wall)
    }

    pub const fn is_band(self) -> bool {
        matches!(self, CellKind::Wall | CellKind::Inlet | CellKind::Outlet)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
}

impl Site {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Unit conversion between lattice and physical quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScales {
    /// mm per cell.
    pub dx_mm: f64,
    /// Seconds per flow-solver step.
    pub dt_flow_s: f64,
    /// Seconds per scalar-solver step.
    pub dt_ade_s: f64,
    /// Hours per outer iteration.
    pub dt_outer_h: f64,
}

impl UnitScales {
    /// Diffusive scaling: `nu_lat = (tau - 1/2) / 3`, `dt = nu_lat dx^2 / nu`.
    pub fn from_relaxation(
        dx_mm: f64,
        tau: f64,
        viscosity_mm2_s: f64,
        tau_d: f64,
        diffusivity_mm2_s: f64,
    ) -> Self {
        let nu_lat = (tau - 0.5) / 3.0;
        let d_lat = (tau_d - 0.5) / 3.0;
        Self {
            dx_mm,
            dt_flow_s: nu_lat * dx_mm * dx_mm / viscosity_mm2_s,
            dt_ade_s: d_lat * dx_mm * dx_mm / diffusivity_mm2_s,
            dt_outer_h: 1.0,
        }
    }

    pub fn flow_velocity_to_lattice(&self, v_mm_s: f64) -> f64 {
        v_mm_s * self.dt_flow_s / self.dx_mm
    }

    /// Factor converting a flow-lattice velocity into scalar-lattice units.
    pub fn flow_to_ade_velocity(&self) -> f64 {
        self.dt_ade_s / self.dt_flow_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
}

const NEIGHBOURS4: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl Lattice {
    /// Every cell of the given kind. No band structure is imposed.
    pub fn filled(width: usize, height: usize, kind: CellKind) -> Self {
        Self {
            width,
            height,
            cells: vec![kind; width * height],
        }
    }

    /// Empty compartment: wall rows top and bottom, inlet column at `x = 0`,
    /// outlet column at `x = width - 1`, fluid elsewhere.
    pub fn channel(width: usize, height: usize) -> Self {
        let mut lattice = Self::filled(width, height, CellKind::Fluid);
        for y in 0..height {
            for x in 0..width {
                let kind = if y == 0 || y + 1 == height {
                    CellKind::Wall
                } else if x == 0 {
                    CellKind::Inlet
                } else if x + 1 == width {
                    CellKind::Outlet
                } else {
                    CellKind::Fluid
                };
                lattice.cells[y * width + x] = kind;
            }
        }
        lattice
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, site: Site) -> usize {
        site.y * self.width + site.x
    }

    #[inline]
    pub fn site(&self, index: usize) -> Site {
        Site::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn kind(&self, site: Site) -> CellKind {
        self.cells[self.index(site)]
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.cells
    }

    /// Changes the kind of an interior cell. Band cells (wall, inlet, outlet)
    /// are fixed for the lifetime of the lattice.
    pub fn set_kind(&mut self, site: Site, kind: CellKind) {
        let i = self.index(site);
        assert!(
            !self.cells[i].is_band() && !kind.is_band(),
            "boundary bands are immutable ({site})"
        );
        self.cells[i] = kind;
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|&&k| k == kind).count()
    }

    pub fn has_inlet(&self) -> bool {
        self.cells.contains(&CellKind::Inlet)
    }

    /// In-bounds 4-neighbours (no periodic wrap).
    pub fn neighbours4(&self, site: Site) -> impl Iterator<Item = Site> + '_ {
        NEIGHBOURS4.iter().filter_map(move |&(dx, dy)| self.offset(site, dx, dy))
    }

    pub fn offset(&self, site: Site, dx: isize, dy: isize) -> Option<Site> {
        let x = site.x as isize + dx;
        let y = site.y as isize + dy;
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            None
        } else {
            Some(Site::new(x as usize, y as usize))
        }
    }

    /// Fraction of non-solid cells in the electrode region. The region
    /// excludes the wall rows, the inlet column and the outlet column.
    pub fn porosity(&self) -> f64 {
        let mut interior = 0usize;
        let mut open = 0usize;
        for &kind in &self.cells {
            if kind.is_band() {
                continue;
            }
            interior += 1;
            if kind != CellKind::ElectrodeSolid {
                open += 1;
            }
        }
        if interior == 0 {
            1.0
        } else {
            open as f64 / interior as f64
        }
    }

    /// Fluid cells face-adjacent to electrode or biofilm, in row-major order.
    pub fn interface_cells(&self) -> Vec<Site> {
        let mut front = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let site = Site::new(x, y);
                if self.kind(site) != CellKind::Fluid {
                    continue;
                }
                let touches = self.neighbours4(site).any(|n| {
                    matches!(self.kind(n), CellKind::ElectrodeSolid | CellKind::Biofilm)
                });
                if touches {
                    front.push(site);
                }
            }
        }
        front
    }

    /// Whether a 4-connected path of flow-permeable cells joins the inlet
    /// column to the outlet column. Lattices without an inlet or an outlet
    /// never percolate.
    pub fn percolates(&self) -> bool {
        self.percolates_with_blocked(None)
    }

    /// Percolation test as if `site` were blocked.
    pub fn percolates_without(&self, site: Site) -> bool {
        self.percolates_with_blocked(Some(self.index(site)))
    }

    fn percolates_with_blocked(&self, blocked: Option<usize>) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::new();
        for (i, &kind) in self.cells.iter().enumerate() {
            if kind == CellKind::Inlet && Some(i) != blocked {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            if self.cells[i] == CellKind::Outlet {
                return true;
            }
            for n in self.neighbours4(self.site(i)) {
                let j = self.index(n);
                if !seen[j] && !self.cells[j].blocks_flow() && Some(j) != blocked {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        false
    }

    /// Per cell, whether it is an inlet whose downstream neighbour reaches
    /// the outlet through flow-permeable cells without passing back through
    /// the inlet column. Inlets facing a dead-end pocket are `false`.
    pub fn fed_inlets(&self) -> Vec<bool> {
        let mut reach = vec![false; self.cells.len()];
        let mut queue = VecDeque::new();
        for (i, &kind) in self.cells.iter().enumerate() {
            if kind == CellKind::Outlet {
                reach[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for n in self.neighbours4(self.site(i)) {
                let j = self.index(n);
                let kind = self.cells[j];
                if !reach[j] && !kind.blocks_flow() && kind != CellKind::Inlet {
                    reach[j] = true;
                    queue.push_back(j);
                }
            }
        }
        self.cells
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                kind == CellKind::Inlet
                    && self
                        .offset(self.site(i), 1, 0)
                        .is_some_and(|n| reach[self.index(n)])
            })
            .collect()
    }

    /// Turns interior fluid cells outside every inlet-to-outlet pore into
    /// electrode: sealed pores, and pores open only to the inlet or only to
    /// the outlet column. Paths may not run along the band columns. Returns
    /// how many cells were filled.
    pub fn fill_sealed_pores(&mut self) -> usize {
        let from_inlet = self.interior_reach(CellKind::Inlet);
        let from_outlet = self.interior_reach(CellKind::Outlet);
        let mut filled = 0;
        for (i, kind) in self.cells.iter_mut().enumerate() {
            if *kind == CellKind::Fluid && !(from_inlet[i] && from_outlet[i]) {
                *kind = CellKind::ElectrodeSolid;
                filled += 1;
            }
        }
        filled
    }

    /// Cells reachable from the `band` column through permeable interior
    /// cells.
    fn interior_reach(&self, band: CellKind) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::new();
        for (i, &kind) in self.cells.iter().enumerate() {
            if kind == band {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for n in self.neighbours4(self.site(i)) {
                let j = self.index(n);
                let kind = self.cells[j];
                if !seen[j] && !kind.blocks_flow() && !kind.is_band() {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Parses a geometry mask: one row per line, first line is `y = 0`.
    /// Alphabet: `.` fluid, `#` electrode, `B` biofilm, `W` wall, `I` inlet,
    /// `O` outlet. Walls may only occupy the first and last rows, inlets the
    /// first column and outlets the last column.
    pub fn from_mask(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::GeometryParse {
                row: 0,
                column: 0,
                message: "empty mask".into(),
            });
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            let n = row.chars().count();
            if n != width {
                return Err(Error::GeometryParse {
                    row: y,
                    column: n.min(width),
                    message: format!("ragged row: expected {width} cells, found {n}"),
                });
            }
            for (x, c) in row.chars().enumerate() {
                let kind = CellKind::from_char(c).ok_or_else(|| Error::GeometryParse {
                    row: y,
                    column: x,
                    message: format!("unknown cell character {c:?}"),
                })?;
                let misplaced = match kind {
                    CellKind::Wall => y != 0 && y + 1 != height,
                    CellKind::Inlet => x != 0,
                    CellKind::Outlet => x + 1 != width,
                    _ => false,
                };
                if misplaced {
                    return Err(Error::GeometryParse {
                        row: y,
                        column: x,
                        message: format!("{kind:?} not allowed at this position"),
                    });
                }
                cells.push(kind);
            }
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn to_mask(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|k| k.to_char()));
            out.push('\n');
        }
        out
    }
}

/// Attempts per seed before a low-porosity request is declared non-percolating.
const GENERATION_ATTEMPTS: usize = 16;

/// Random porous electrode: small seed-grown clusters of 2-6 solid cells
/// scattered over the interior until the requested porosity is met. Pores
/// off the inlet-to-outlet pore space count as solid.
pub fn generate_random_electrode(
    width: usize,
    height: usize,
    target_porosity: f64,
    seed: u64,
) -> Result<Lattice> {
    if width < 4 || height < 4 {
        return Err(Error::config(
            "lattice",
            format!("dimensions {width}x{height} below the 4x4 minimum"),
        ));
    }
    if !(target_porosity > 0.0 && target_porosity <= 1.0) {
        return Err(Error::config(
            "lattice.porosity",
            format!("{target_porosity} outside (0, 1]"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = (width - 2) * (height - 2);
    let target = ((1.0 - target_porosity) * interior as f64).round() as usize;

    for _ in 0..GENERATION_ATTEMPTS {
        let mut lattice = Lattice::channel(width, height);
        let mut placed = 0;
        while placed < target {
            let size = rng.gen_range(2..=6).min(target - placed);
            let seed_site = Site::new(rng.gen_range(1..width - 1), rng.gen_range(1..height - 1));
            if lattice.kind(seed_site) != CellKind::Fluid {
                continue;
            }
            lattice.set_kind(seed_site, CellKind::ElectrodeSolid);
            let mut blob = vec![seed_site];
            while blob.len() < size {
                let mut candidates: Vec<Site> = blob
                    .iter()
                    .flat_map(|&s| lattice.neighbours4(s).collect::<Vec<_>>())
                    .filter(|&n| lattice.kind(n) == CellKind::Fluid)
                    .collect();
                candidates.sort_unstable();
                candidates.dedup();
                match candidates.choose(&mut rng) {
                    Some(&next) => {
                        lattice.set_kind(next, CellKind::ElectrodeSolid);
                        blob.push(next);
                    }
                    None => break,
                }
            }
            placed += blob.len();
            placed += lattice.fill_sealed_pores();
        }
        if lattice.percolates() {
            return Ok(lattice);
        }
    }
    Err(Error::NotPercolating)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_fluid_mask(w: usize, h: usize) -> String {
        (0..h).map(|_| ".".repeat(w) + "\n").collect()
    }

    #[test]
    fn all_fluid_mask_loads() {
        let lattice = Lattice::from_mask(&all_fluid_mask(10, 10)).unwrap();
        assert_eq!((lattice.width(), lattice.height()), (10, 10));
        assert_eq!(lattice.count(CellKind::Fluid), 100);
        assert_eq!(lattice.porosity(), 1.0);
    }

    #[test]
    fn single_solid_in_mask() {
        let mut mask: Vec<Vec<char>> = (0..10).map(|_| vec!['.'; 10]).collect();
        mask[5][5] = '#';
        let text: String = mask.iter().map(|r| r.iter().collect::<String>() + "\n").collect();
        let lattice = Lattice::from_mask(&text).unwrap();
        assert_eq!(lattice.count(CellKind::ElectrodeSolid), 1);
        assert_eq!(lattice.kind(Site::new(5, 5)), CellKind::ElectrodeSolid);
    }

    #[test]
    fn unknown_character_reports_position() {
        let text = "....\n..Z.\n....\n";
        match Lattice::from_mask(text) {
            Err(Error::GeometryParse { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = "....\n...\n....\n";
        assert!(matches!(
            Lattice::from_mask(text),
            Err(Error::GeometryParse { row: 1, .. })
        ));
    }

    #[test]
    fn misplaced_wall_rejected() {
        let text = "WWWW\n.W..\nWWWW\n";
        assert!(matches!(
            Lattice::from_mask(text),
            Err(Error::GeometryParse { row: 1, column: 1, .. })
        ));
    }

    #[test]
    fn mask_round_trip() {
        let lattice = generate_random_electrode(30, 20, 0.8, 7).unwrap();
        let back = Lattice::from_mask(&lattice.to_mask()).unwrap();
        assert_eq!(lattice, back);
    }

    #[test]
    fn single_solid_front_is_its_four_neighbours() {
        let mut lattice = Lattice::filled(9, 9, CellKind::Fluid);
        lattice.set_kind(Site::new(4, 4), CellKind::ElectrodeSolid);
        let front = lattice.interface_cells();
        assert_eq!(
            front,
            vec![
                Site::new(4, 3),
                Site::new(3, 4),
                Site::new(5, 4),
                Site::new(4, 5)
            ]
        );
    }

    #[test]
    fn all_fluid_has_no_front() {
        assert!(Lattice::channel(12, 10).interface_cells().is_empty());
    }

    #[test]
    fn half_solid_porosity() {
        let mut lattice = Lattice::channel(6, 6);
        // interior is 4x4; fill the left two interior columns
        for y in 1..5 {
            for x in 1..3 {
                lattice.set_kind(Site::new(x, y), CellKind::ElectrodeSolid);
            }
        }
        assert_eq!(lattice.porosity(), 0.5);
    }

    #[test]
    fn table_porosity_generation() {
        let lattice = generate_random_electrode(60, 65, 0.874, 1).unwrap();
        let phi = lattice.porosity();
        assert!((phi - 0.874).abs() <= 0.02, "porosity {phi}");
        assert!(lattice.percolates());
        assert!(!lattice.interface_cells().is_empty());
    }

    #[test]
    fn unit_porosity_has_no_solids() {
        let lattice = generate_random_electrode(60, 65, 1.0, 1).unwrap();
        assert_eq!(lattice.count(CellKind::ElectrodeSolid), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_electrode(60, 65, 0.874, 1).unwrap();
        let b = generate_random_electrode(60, 65, 0.874, 1).unwrap();
        let c = generate_random_electrode(60, 65, 0.874, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bands_are_in_place() {
        let lattice = generate_random_electrode(20, 15, 0.874, 3).unwrap();
        for y in 0..15 {
            for x in 0..20 {
                let k = lattice.kind(Site::new(x, y));
                if y == 0 || y == 14 {
                    assert_eq!(k, CellKind::Wall);
                } else if x == 0 {
                    assert_eq!(k, CellKind::Inlet);
                } else if x == 19 {
                    assert_eq!(k, CellKind::Outlet);
                } else {
                    assert!(!k.is_band());
                }
            }
        }
    }

    #[test]
    fn very_low_porosity_rejected() {
        assert!(matches!(
            generate_random_electrode(20, 20, 0.05, 1),
            Err(Error::NotPercolating)
        ));
    }

    #[test]
    fn blocked_column_does_not_percolate() {
        let mut lattice = Lattice::channel(10, 8);
        for y in 1..7 {
            lattice.set_kind(Site::new(4, y), CellKind::ElectrodeSolid);
        }
        assert!(!lattice.percolates());
        lattice.set_kind(Site::new(4, 3), CellKind::Fluid);
        assert!(lattice.percolates());
        assert!(!lattice.percolates_without(Site::new(4, 3)));
    }

    #[test]
    fn inlets_facing_pockets_are_not_fed() {
        let lattice = Lattice::from_mask(
            "WWWWWW\n\
             I.#..O\n\
             I##..O\n\
             I....O\n\
             WWWWWW\n",
        )
        .unwrap();
        let fed = lattice.fed_inlets();
        let at = |y| fed[lattice.index(Site::new(0, y))];
        assert!(!at(1));
        assert!(!at(2));
        assert!(at(3));
        assert!(!at(0));
        let open = Lattice::channel(6, 5);
        let fed = open.fed_inlets();
        assert_eq!(fed.iter().filter(|&&f| f).count(), 3);
    }

    #[test]
    fn sealed_pore_is_filled() {
        let mut lattice = Lattice::from_mask(
            "WWWWWWW\n\
             I.....O\n\
             I.###.O\n\
             I.#.#.O\n\
             I.###.O\n\
             WWWWWWW\n",
        )
        .unwrap();
        assert_eq!(lattice.fill_sealed_pores(), 1);
        assert_eq!(lattice.kind(Site::new(3, 3)), CellKind::ElectrodeSolid);
        assert_eq!(lattice.fill_sealed_pores(), 0);
        // a pore open only to the outlet column
        let mut lattice = Lattice::from_mask(
            "WWWWWW\n\
             I....O\n\
             I.###O\n\
             I.##.O\n\
             WWWWWW\n",
        )
        .unwrap();
        assert_eq!(lattice.fill_sealed_pores(), 1);
        assert_eq!(lattice.kind(Site::new(4, 3)), CellKind::ElectrodeSolid);
        assert_eq!(lattice.kind(Site::new(1, 3)), CellKind::Fluid);
    }

    #[test]
    fn generated_lattice_has_no_sealed_pores() {
        for seed in 0..5 {
            let mut lattice = generate_random_electrode(60, 65, 0.874, seed).unwrap();
            assert_eq!(lattice.fill_sealed_pores(), 0);
        }
    }

    #[test]
    fn table_unit_scales() {
        let s = UnitScales::from_relaxation(1.0, 0.6706, 1.004, 0.5036, 0.0012);
        assert!((s.dt_flow_s - 0.056640).abs() < 1e-5, "{}", s.dt_flow_s);
        assert!((s.dt_ade_s - 1.0).abs() < 1e-9, "{}", s.dt_ade_s);
    }
}
