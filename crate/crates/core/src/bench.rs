//! Analytic validation runs behind `mfc-lbm bench`.

use crate::ade::{self, AdeParams, ScalarState};
use crate::error::Result;
use crate::flow::{self, FlowParams, FlowState};
use crate::grid::Lattice;

/// Periodic channel `width` fluid rows wide with wall rows above and below.
pub fn periodic_channel(length: usize, width: usize) -> Lattice {
    let wall = "W".repeat(length);
    let fluid = ".".repeat(length);
    let mut mask = String::new();
    mask.push_str(&wall);
    mask.push('\n');
    for _ in 0..width {
        mask.push_str(&fluid);
        mask.push('\n');
    }
    mask.push_str(&wall);
    mask.push('\n');
    Lattice::from_mask(&mask).expect("channel mask is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoiseuilleReport {
    pub width: usize,
    pub steps: usize,
    /// Relative L2 error of `u_x` across the channel.
    pub l2_error: f64,
}

/// Body-force-driven channel flow against the parabola with walls half a
/// cell outside the first and last fluid rows.
pub fn poiseuille(width: usize, tau: f64, u_max: f64) -> Result<PoiseuilleReport> {
    let length = 4;
    let lattice = periodic_channel(length, width);
    let nu = (tau - 0.5) / 3.0;
    let h = width as f64;
    let g = 8.0 * nu * u_max / (h * h);
    let params = FlowParams {
        tau,
        inflow_velocity: 0.0,
        body_force: [g, 0.0],
        max_steps: 2_000_000,
        tolerance: 1e-12,
        check_every: 500,
    };
    let mut state = FlowState::new(length, width + 2);
    let field = flow::run_to_steady(&lattice, &params, &mut state)?;
    let (mut num, mut den) = (0.0, 0.0);
    for row in 1..=width {
        let y = row as f64 - 0.5;
        let exact = g / (2.0 * nu) * y * (h - y);
        let got = field.u[row * length][0];
        num += (got - exact).powi(2);
        den += exact * exact;
    }
    Ok(PoiseuilleReport {
        width,
        steps: field.steps,
        l2_error: (num / den).sqrt(),
    })
}

/// Errors at the given widths and the least-squares slope of
/// `log(error)` against `log(width)`, negated.
pub fn poiseuille_suite(widths: &[usize], tau: f64) -> Result<(Vec<PoiseuilleReport>, f64)> {
    let reports = widths
        .iter()
        .map(|&w| poiseuille(w, tau, 0.01))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| ((r.width as f64).ln(), r.l2_error.ln()))
        .collect();
    Ok((reports, -slope(&pts)))
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn scalar_params(tau_d: f64) -> AdeParams {
    // no inlet cells; c_in only sets the scale of the negativity check
    AdeParams {
        tau_d,
        c_in: 1.0,
        ..AdeParams::default()
    }
}

fn diffuse(lattice: &Lattice, state: &mut ScalarState, tau_d: f64, steps: usize) -> Result<()> {
    let prop = ade::propagator(lattice);
    let params = scalar_params(tau_d);
    let zero_u = vec![[0.0; 2]; lattice.len()];
    let no_sink = vec![0.0; lattice.len()];
    for _ in 0..steps {
        ade::ade_step(state, lattice, &prop, &params, &zero_u, &no_sink)?;
    }
    Ok(())
}

/// A unit step diffused along a periodic strip, against the pair of erf
/// fronts. Returns the L-infinity error.
pub fn diffusion_step(tau_d: f64, steps: usize) -> Result<f64> {
    let n = 400;
    let (lo, hi) = (100, 300);
    let lattice = Lattice::filled(n, 1, crate::grid::CellKind::Fluid);
    let init: Vec<f64> = (0..n).map(|x| if (lo..hi).contains(&x) { 1.0 } else { 0.0 }).collect();
    let mut state = ScalarState::from_concentration(n, 1, &init)?;
    diffuse(&lattice, &mut state, tau_d, steps)?;
    let d = (tau_d - 0.5) / 3.0;
    let s = (4.0 * d * steps as f64).sqrt();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        let xf = x as f64;
        let exact = 0.5 * (libm::erf((xf - lo as f64 + 0.5) / s) - libm::erf((xf - hi as f64 + 0.5) / s));
        worst = worst.max((state.concentration(x) - exact).abs());
    }
    Ok(worst)
}

/// Diffusivity measured from the spreading of a Gaussian pulse on a
/// periodic square, `(var(t2) - var(t1)) / (4 (t2 - t1))` with the variance
/// summed over both axes.
pub fn pulse_diffusivity(tau_d: f64, size: usize, sigma0: f64, t1: usize, t2: usize) -> Result<f64> {
    let lattice = Lattice::filled(size, size, crate::grid::CellKind::Fluid);
    let c = (size / 2) as f64;
    let init: Vec<f64> = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as f64 - c, (i / size) as f64 - c);
            (-(x * x + y * y) / (2.0 * sigma0 * sigma0)).exp()
        })
        .collect();
    let mut state = ScalarState::from_concentration(size, size, &init)?;
    diffuse(&lattice, &mut state, tau_d, t1)?;
    let v1 = variance(&state, size);
    diffuse(&lattice, &mut state, tau_d, t2 - t1)?;
    let v2 = variance(&state, size);
    Ok((v2 - v1) / (4.0 * (t2 - t1) as f64))
}

fn variance(state: &ScalarState, size: usize) -> f64 {
    let c = (size / 2) as f64;
    let (mut m0, mut m2) = (0.0, 0.0);
    for i in 0..size * size {
        let (x, y) = ((i % size) as f64 - c, (i / size) as f64 - c);
        let v = state.concentration(i);
        m0 += v;
        m2 += v * (x * x + y * y);
    }
    m2 / m0
}
