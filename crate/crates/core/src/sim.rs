//! Hourly outer loop: flow, substrate transport, electrochemistry, biofilm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ade::{self, ConcentrationField, ScalarState};
use crate::biofilm::{self, BiofilmState};
use crate::config::SimulationConfig;
use crate::electrochem::{self, CircuitState};
use crate::error::{Error, Result};
use crate::flow::{self, FlowField, FlowState};
use crate::grid::{generate_random_electrode, Lattice};

/// Stream used for the biofilm draws; geometry generation uses stream 0.
const BIOFILM_STREAM: u64 = 1;

/// One row of the hourly time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricalRecord {
    pub hour: usize,
    /// A
    pub current: f64,
    /// V
    pub voltage: f64,
    pub n_conc: f64,
    pub n_act: f64,
    pub mred_frac: f64,
    pub mox_frac: f64,
    /// mg
    pub total_biomass: f64,
    /// mg/L over the open (fluid and biofilm) cells
    pub mean_substrate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourStats {
    pub hour: usize,
    pub flow_steps: usize,
    pub flow_residual: f64,
    pub ade_steps: usize,
    pub ade_residual: f64,
    pub attached: usize,
    pub spread_events: usize,
    pub mediator_clamps: usize,
    pub biofilm_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// The biofilm ran out of room during `hour`; that hour's record is kept.
    Clogged { hour: usize, x: usize, y: usize },
}

/// Fields converged during one hour, before the biofilm update.
#[derive(Debug, Clone)]
pub struct HourFields {
    pub hour: usize,
    pub lattice: Lattice,
    pub flow: FlowField,
    pub conc: ConcentrationField,
    pub c_bio: Vec<f64>,
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    /// Completed hours.
    pub hour: usize,
    pub lattice: Lattice,
    pub flow: FlowState,
    pub scalar: ScalarState,
    pub biofilm: BiofilmState,
    pub rng: ChaCha8Rng,
    pub records: Vec<ElectricalRecord>,
    pub stats: Vec<HourStats>,
    /// Set when the biofilm clogs the domain.
    pub termination: Option<Termination>,
}

impl SimulationState {
    /// Builds the geometry (random electrode, or `lattice` when given) and
    /// the initial fields: fluid at rest and substrate at the inlet value.
    pub fn new(config: &SimulationConfig, lattice: Option<Lattice>) -> Result<Self> {
        config.validate()?;
        let lattice = match lattice {
            Some(l) => l,
            None => generate_random_electrode(
                config.lattice.lx,
                config.lattice.ly,
                config.lattice.porosity,
                config.geometry_seed(),
            )?,
        };
        if (lattice.width(), lattice.height()) != (config.lattice.lx, config.lattice.ly) {
            return Err(Error::config(
                "lattice.geometry",
                format!(
                    "mask is {}x{} but lattice.Lx x lattice.Ly is {}x{}",
                    lattice.width(),
                    lattice.height(),
                    config.lattice.lx,
                    config.lattice.ly
                ),
            ));
        }
        let (w, h) = (lattice.width(), lattice.height());
        let biofilm = BiofilmState::for_lattice(&lattice, config.biofilm.c0_bio, config.electro.m_total);
        let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
        rng.set_stream(BIOFILM_STREAM);
        Ok(Self {
            hour: 0,
            flow: FlowState::new(w, h),
            scalar: ScalarState::uniform(w, h, config.ade.c_in),
            biofilm,
            lattice,
            rng,
            records: Vec::new(),
            stats: Vec::new(),
            termination: None,
        })
    }

    /// Checks that every field fits the configured lattice.
    pub fn lattice_matches(&self, config: &SimulationConfig) -> Result<()> {
        let dims = (self.lattice.width(), self.lattice.height());
        if dims != (config.lattice.lx, config.lattice.ly) {
            return Err(Error::Dimension(format!(
                "state lattice {}x{} against configured {}x{}",
                dims.0, dims.1, config.lattice.lx, config.lattice.ly
            )));
        }
        self.flow.check_dims(&self.lattice)?;
        self.scalar.check_dims(&self.lattice)?;
        self.biofilm.check_dims(&self.lattice)
    }

    pub fn is_finished(&self, config: &SimulationConfig) -> bool {
        self.termination.is_some() || self.hour >= config.run.hours
    }

    /// `Completed` once the configured hours are done, the clog otherwise.
    pub fn status(&self, config: &SimulationConfig) -> Option<Termination> {
        self.termination
            .or((self.hour >= config.run.hours).then_some(Termination::Completed))
    }

    /// Biomass mass per cell, mg.
    fn biomass(&self, config: &SimulationConfig) -> Vec<f64> {
        let v = config.cell_volume();
        self.biofilm.c_bio.iter().map(|c| c * v).collect()
    }

    /// Runs one outer iteration. A clog ends the run with the hour's record
    /// kept; solver failures are returned as errors.
    pub fn step_hour(&mut self, config: &SimulationConfig) -> Result<HourFields> {
        if let Some(t) = self.termination {
            return Err(Error::Checkpoint(format!("run already terminated: {t:?}")));
        }
        let hour = self.hour;
        let dt_h = config.scales().dt_outer_h;
        let e = &config.electro;

        let flow_field = flow::run_to_steady(&self.lattice, &config.flow_params(), &mut self.flow)?;

        let ade_params = config.ade_params();
        let sink = self.substrate_sink(config);
        let velocity = transport_velocity(&flow_field);
        let conc = ade::run_to_steady_ade(
            &self.lattice,
            &ade_params,
            &velocity,
            &sink,
            &mut self.scalar,
        )?;

        let q = biofilm::consumption_rates(&self.biofilm, &conc.conc, e);
        let biomass = self.biomass(config);
        let circuit = electrochem::solve_circuit(&biomass, &self.biofilm.m_ox, e);
        let clamps = electrochem::update_mediator(
            &biomass,
            &q,
            &mut self.biofilm.m_ox,
            circuit.current,
            e,
            dt_h,
        );
        self.records.push(record(
            hour,
            &circuit,
            biomass.iter().sum(),
            conc.mean_open(&self.lattice),
        ));

        let fields = HourFields {
            hour,
            lattice: self.lattice.clone(),
            flow: flow_field,
            conc,
            c_bio: self.biofilm.c_bio.clone(),
        };

        let attached = biofilm::attach(
            &mut self.lattice,
            &mut self.biofilm,
            &config.biofilm,
            e.m_total,
            &mut self.rng,
        )?;
        biofilm::grow(&mut self.biofilm, &q, &config.biofilm, dt_h);
        let spread = match biofilm::spread(&mut self.lattice, &mut self.biofilm, &config.biofilm, &mut self.rng) {
            Ok(n) => n,
            Err(Error::Clogged { x, y, .. }) => {
                self.termination = Some(Termination::Clogged { hour, x, y });
                0
            }
            Err(other) => return Err(other),
        };

        self.stats.push(HourStats {
            hour,
            flow_steps: fields.flow.steps,
            flow_residual: fields.flow.residual,
            ade_steps: fields.conc.steps,
            ade_residual: fields.conc.residual,
            attached,
            spread_events: spread,
            mediator_clamps: clamps,
            biofilm_cells: self.biofilm.occupied(),
        });
        self.hour += 1;
        Ok(fields)
    }

    /// Substrate removed per ADE step at each biofilm cell at saturating
    /// substrate (mg/L). The ADE applies the substrate half saturation.
    fn substrate_sink(&self, config: &SimulationConfig) -> Vec<f64> {
        let e = &config.electro;
        let per_step_days = config.scales().dt_ade_s / 86_400.0;
        let k_mox = e.k_mox();
        self.biofilm
            .c_bio
            .iter()
            .zip(&self.biofilm.m_ox)
            .map(|(&c, &m)| {
                if c > 0.0 {
                    e.q_max * m / (m + k_mox) * c * per_step_days
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Advecting velocity for the scalar: the momentum density `rho u`, which
/// is divergence free at steady state where `u` alone is not.
pub fn transport_velocity(field: &FlowField) -> Vec<[f64; 2]> {
    field
        .u
        .iter()
        .zip(&field.rho)
        .map(|(u, &rho)| [rho * u[0], rho * u[1]])
        .collect()
}

fn record(hour: usize, c: &CircuitState, total_biomass: f64, mean_substrate: f64) -> ElectricalRecord {
    ElectricalRecord {
        hour,
        current: c.current,
        voltage: c.voltage,
        n_conc: c.n_conc,
        n_act: c.n_act,
        mred_frac: c.mred_frac,
        mox_frac: c.mox_frac,
        total_biomass,
        mean_substrate,
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub records: Vec<ElectricalRecord>,
    pub stats: Vec<HourStats>,
    pub termination: Termination,
    /// Fields of the last completed hour.
    pub last_fields: Option<HourFields>,
    pub state: SimulationState,
}

/// Runs `state` to the configured length, handing each hour's fields to
/// `observe`.
pub fn run_from<F>(config: &SimulationConfig, mut state: SimulationState, mut observe: F) -> Result<SimulationResult>
where
    F: FnMut(&SimulationState, &HourFields) -> Result<()>,
{
    let mut last = None;
    while !state.is_finished(config) {
        let fields = state.step_hour(config)?;
        observe(&state, &fields)?;
        last = Some(fields);
    }
    Ok(SimulationResult {
        records: state.records.clone(),
        stats: state.stats.clone(),
        termination: state.status(config).unwrap_or(Termination::Completed),
        last_fields: last,
        state,
    })
}

/// Builds the geometry and runs the configured number of hours.
pub fn run(config: &SimulationConfig) -> Result<SimulationResult> {
    let state = SimulationState::new(config, None)?;
    run_from(config, state, |_, _| Ok(()))
}
