//! D2Q9 velocity set and the streaming machinery shared by both solvers.
//!
//! Direction numbering: 0 rest, 1 east, 2 north, 3 west, 4 south,
//! 5 north-east, 6 north-west, 7 south-west, 8 south-east. With this
//! numbering a south wall reflects 7 into 5, 4 into 2 and 8 into 6.

use crate::grid::{CellKind, Lattice};

pub const Q: usize = 9;

pub const VELOCITIES: [[i32; 2]; Q] = [
    [0, 0],
    [1, 0],
    [0, 1],
    [-1, 0],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];

pub const WEIGHTS: [f64; Q] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

pub const OPPOSITE: [usize; Q] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

/// Second-order equilibrium in lattice units (`c_s^2 = 1/3`).
#[inline]
pub fn equilibrium(density: f64, u: [f64; 2]) -> [f64; Q] {
    let usq = 1.5 * (u[0] * u[0] + u[1] * u[1]);
    let mut feq = [0.0; Q];
    for i in 0..Q {
        let cu = VELOCITIES[i][0] as f64 * u[0] + VELOCITIES[i][1] as f64 * u[1];
        feq[i] = WEIGHTS[i] * density * (1.0 + 3.0 * cu + 4.5 * cu * cu - usq);
    }
    feq
}

/// Zeroth and first moments of one cell's distributions.
#[inline]
pub fn moments(f: &[f64]) -> (f64, [f64; 2]) {
    let rho = f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8];
    let jx = f[1] - f[3] + f[5] - f[6] - f[7] + f[8];
    let jy = f[2] - f[4] + f[5] + f[6] - f[7] - f[8];
    (rho, [jx, jy])
}

/// Precomputed streaming tables for one lattice configuration.
///
/// Streaming is periodic at the domain edges. Populations pushed into a
/// blocked cell are parked in that cell's slots until [`Propagator::bounce_back`]
/// returns them, reversed, to the cell they came from (half-way bounce-back).
#[derive(Debug, Clone)]
pub struct Propagator {
    width: usize,
    height: usize,
    active: Vec<u32>,
    blocked: Vec<u32>,
    dest: Vec<u32>,
    reflections: Vec<(u32, u32)>,
}

impl Propagator {
    pub fn new(lattice: &Lattice, is_blocked: impl Fn(CellKind) -> bool) -> Self {
        let (w, h) = (lattice.width(), lattice.height());
        let n = w * h;
        let kinds = lattice.kinds();
        let mut active = Vec::new();
        let mut blocked = Vec::new();
        let mut dest = vec![0u32; n * Q];
        let mut reflections = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let cell = y * w + x;
                if is_blocked(kinds[cell]) {
                    blocked.push(cell as u32);
                } else {
                    active.push(cell as u32);
                }
                for i in 0..Q {
                    let tx = (x as i64 + VELOCITIES[i][0] as i64).rem_euclid(w as i64) as usize;
                    let ty = (y as i64 + VELOCITIES[i][1] as i64).rem_euclid(h as i64) as usize;
                    let target = ty * w + tx;
                    dest[cell * Q + i] = (target * Q + i) as u32;
                    if !is_blocked(kinds[cell]) && is_blocked(kinds[target]) {
                        reflections.push(((target * Q + i) as u32, (cell * Q + OPPOSITE[i]) as u32));
                    }
                }
            }
        }
        Self {
            width: w,
            height: h,
            active,
            blocked,
            dest,
            reflections,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().map(|&c| c as usize)
    }

    pub fn blocked(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocked.iter().map(|&c| c as usize)
    }

    /// Destination slots of the nine populations leaving `cell`.
    #[inline]
    pub fn targets(&self, cell: usize) -> &[u32] {
        &self.dest[cell * Q..(cell + 1) * Q]
    }

    /// Pushes every population of every active cell one link along its
    /// velocity, from `src` into `dst`. No slot is read and written in the
    /// same buffer.
    pub fn stream(&self, src: &[f64], dst: &mut [f64]) {
        debug_assert_eq!(src.len(), dst.len());
        for &cell in &self.active {
            let base = cell as usize * Q;
            for i in 0..Q {
                dst[self.dest[base + i] as usize] = src[base + i];
            }
        }
    }

    /// Returns populations parked in blocked cells to their source cell in the
    /// opposite direction, then clears the blocked cells.
    pub fn bounce_back(&self, f: &mut [f64]) {
        for &(parked, back) in &self.reflections {
            f[back as usize] = f[parked as usize];
        }
        for &cell in &self.blocked {
            let base = cell as usize * Q;
            f[base..base + Q].fill(0.0);
        }
    }
}
