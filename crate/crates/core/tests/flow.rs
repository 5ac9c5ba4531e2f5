use mfc_lbm::config::SimulationConfig;
use mfc_lbm::d2q9::{self, Q, VELOCITIES};
use mfc_lbm::flow::{self, FlowParams, FlowState};
use mfc_lbm::grid::{generate_random_electrode, CellKind, Lattice, Site};
use proptest::prelude::*;

fn channel_params(v: f64) -> FlowParams {
    FlowParams {
        inflow_velocity: v,
        tolerance: 1e-11,
        ..FlowParams::default()
    }
}

#[test]
fn empty_channel_flux_is_uniform() {
    let lattice = Lattice::channel(40, 14);
    let mut state = FlowState::new(40, 14);
    let field = flow::run_to_steady(&lattice, &channel_params(0.01), &mut state).unwrap();
    let flux = |x: usize| -> f64 {
        (1..13)
            .map(|y| {
                let c = lattice.index(Site::new(x, y));
                field.rho[c] * field.u[c][0]
            })
            .sum()
    };
    let reference = flux(1);
    assert!(reference > 0.0);
    for x in 2..39 {
        let rel = (flux(x) - reference).abs() / reference;
        assert!(rel < 1e-8, "column {x}: {rel:e}");
    }
}

#[test]
fn inlet_holds_prescribed_velocity() {
    let lattice = Lattice::channel(30, 10);
    let mut state = FlowState::new(30, 10);
    let field = flow::run_to_steady(&lattice, &channel_params(0.005), &mut state).unwrap();
    let inlet: Vec<f64> = (1..9).map(|y| field.velocity(Site::new(0, y))[0]).collect();
    let mean = inlet.iter().sum::<f64>() / inlet.len() as f64;
    assert!((mean - 0.005).abs() < 1e-6, "{mean}");
}

#[test]
fn zero_inflow_converges_to_rest() {
    let lattice = generate_random_electrode(30, 24, 0.874, 4).unwrap();
    let mut state = FlowState::new(30, 24);
    let field = flow::run_to_steady(&lattice, &channel_params(0.0), &mut state).unwrap();
    assert!(field.max_speed() < 1e-12);
}

#[test]
fn obstacles_report_zero_velocity() {
    let lattice = generate_random_electrode(60, 65, 0.874, 1).unwrap();
    let mut state = FlowState::new(60, 65);
    let params = SimulationConfig::default().flow_params();
    let field = flow::run_to_steady(&lattice, &params, &mut state).unwrap();
    for (cell, &kind) in lattice.kinds().iter().enumerate() {
        if kind.blocks_flow() {
            assert_eq!(field.u[cell], [0.0, 0.0], "{:?}", lattice.site(cell));
        }
    }
}

#[test]
fn solve_is_bit_reproducible() {
    let lattice = generate_random_electrode(24, 20, 0.874, 8).unwrap();
    let solve = || {
        let mut state = FlowState::new(24, 20);
        flow::run_to_steady(&lattice, &channel_params(0.002), &mut state).unwrap()
    };
    assert_eq!(solve(), solve());
}

#[test]
fn periodic_box_conserves_momentum() {
    let lattice = Lattice::filled(16, 16, CellKind::Fluid);
    let mut state = FlowState::uniform(16, 16, 1.0, [0.02, -0.01]);
    for cell in 0..lattice.len() {
        let bump = 1.0 + 0.01 * ((cell * 7919 % 101) as f64 / 101.0 - 0.5);
        for f in state.cell_mut(cell) {
            *f *= bump;
        }
    }
    let p0 = state.total_momentum();
    let m0 = state.total_mass();
    let prop = flow::propagator(&lattice);
    for _ in 0..500 {
        flow::step(&mut state, &lattice, &prop, &FlowParams::default());
    }
    let p1 = state.total_momentum();
    assert!((state.total_mass() - m0).abs() / m0 < 1e-12);
    for k in 0..2 {
        assert!((p1[k] - p0[k]).abs() < 1e-12, "{p0:?} -> {p1:?}");
    }
}

fn distributions() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, Q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn equilibrium_moments(rho in 0.5f64..2.0, ux in -0.1f64..0.1, uy in -0.1f64..0.1) {
        let feq = d2q9::equilibrium(rho, [ux, uy]);
        let m0: f64 = feq.iter().sum();
        let mx: f64 = feq.iter().zip(VELOCITIES).map(|(f, c)| f * c[0] as f64).sum();
        let my: f64 = feq.iter().zip(VELOCITIES).map(|(f, c)| f * c[1] as f64).sum();
        prop_assert!((m0 - rho).abs() <= 1e-13);
        prop_assert!((mx - rho * ux).abs() <= 1e-13);
        prop_assert!((my - rho * uy).abs() <= 1e-13);
    }
}

proptest! {
    #[test]
    fn macroscopic_matches_resummation(f in distributions(), solid in any::<bool>()) {
        let mut lattice = Lattice::filled(3, 1, CellKind::Fluid);
        if solid {
            lattice.set_kind(Site::new(2, 0), CellKind::ElectrodeSolid);
        }
        let mut state = FlowState::new(3, 1);
        state.cell_mut(1).copy_from_slice(&f);
        let field = flow::macroscopic(&state, &lattice, [0.0; 2]).unwrap();
        let rho: f64 = f.iter().sum();
        let jx = f[1] - f[3] + f[5] - f[6] - f[7] + f[8];
        let jy = f[2] - f[4] + f[5] + f[6] - f[7] - f[8];
        prop_assert!((field.rho[1] - rho).abs() <= 1e-14 * rho.max(1.0));
        prop_assert!((field.u[1][0] - jx / rho).abs() <= 1e-14);
        prop_assert!((field.u[1][1] - jy / rho).abs() <= 1e-14);
        if solid {
            prop_assert_eq!(field.u[2], [0.0, 0.0]);
        }
    }

    #[test]
    fn closed_box_keeps_mass(seed in 0u64..200) {
        let mut mask = String::from("WWWWWWWWWW\n");
        for y in 1..7 {
            for x in 0..10 {
                let solid = x == 0 || x == 9 || (x * 31 + y * 17 + seed as usize) % 9 == 0;
                mask.push(if solid { '#' } else { '.' });
            }
            mask.push('\n');
        }
        mask.push_str("WWWWWWWWWW\n");
        let lattice = Lattice::from_mask(&mask).unwrap();
        let mut state = FlowState::uniform(10, 8, 1.0, [0.03, 0.01]);
        flow::refresh_obstacles(&mut state, &lattice);
        let m0 = state.total_mass();
        let prop = flow::propagator(&lattice);
        for _ in 0..200 {
            flow::step(&mut state, &lattice, &prop, &FlowParams::default());
        }
        prop_assert!((state.total_mass() - m0).abs() / m0 <= 1e-12);
    }
}
