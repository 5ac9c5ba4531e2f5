//! Run configuration: TOML with one table per module. Every key is
//! optional and defaults to the reference parameter set; unknown keys are
//! rejected with their full dotted path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ade::AdeParams;
use crate::biofilm::BiofilmParams;
use crate::electrochem::ElectroParams;
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::grid::UnitScales;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub lattice: LatticeConfig,
    pub flow: FlowConfig,
    pub ade: AdeConfig,
    pub electro: ElectroParams,
    pub biofilm: BiofilmParams,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    /// cells along the flow direction
    #[serde(rename = "Lx")]
    pub lx: usize,
    /// cells across the flow
    #[serde(rename = "Ly")]
    pub ly: usize,
    pub porosity: f64,
    /// mm per cell
    pub dx_mm: f64,
    /// Geometry seed. Falls back to `run.seed`.
    pub seed: Option<u64>,
    /// Mask file replacing the random electrode.
    pub geometry: Option<PathBuf>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            lx: 60,
            ly: 65,
            porosity: 0.874,
            dx_mm: 1.0,
            seed: None,
            geometry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub tau: f64,
    /// mm^2/s
    pub viscosity: f64,
    /// inlet velocity, mm/s
    #[serde(rename = "V")]
    pub inflow_velocity: f64,
    pub max_steps: usize,
    pub tolerance: f64,
    pub check_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let base = FlowParams::default();
        Self {
            tau: base.tau,
            viscosity: 1.004,
            inflow_velocity: 1.758e-2,
            max_steps: base.max_steps,
            tolerance: base.tolerance,
            check_every: base.check_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdeConfig {
    #[serde(rename = "tau_D")]
    pub tau_d: f64,
    /// mm^2/s
    #[serde(rename = "D")]
    pub diffusivity: f64,
    /// mg/L
    #[serde(rename = "C_in")]
    pub c_in: f64,
    pub max_steps: usize,
    pub tolerance: f64,
    pub check_every: usize,
}

impl Default for AdeConfig {
    fn default() -> Self {
        let base = AdeParams::default();
        Self {
            tau_d: base.tau_d,
            diffusivity: 0.0012,
            c_in: base.c_in,
            max_steps: base.max_steps,
            tolerance: base.tolerance,
            check_every: base.check_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub hours: usize,
    pub seed: u64,
    /// Snapshot every N hours (and always after the last hour). 0 keeps
    /// only the final snapshot.
    pub snapshot_every: usize,
    /// Checkpoint every N hours (and always after the last hour). 0 keeps
    /// only the final checkpoint.
    pub checkpoint_every: usize,
    /// Also write greymap images next to the CSV snapshots.
    pub pgm: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hours: 72,
            seed: 1,
            snapshot_every: 12,
            checkpoint_every: 0,
            pgm: true,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("{v} must be positive")))
    }
}

fn steps(section: &str, max_steps: usize, tolerance: f64, check_every: usize) -> Result<()> {
    positive(&format!("{section}.tolerance"), tolerance)?;
    if check_every == 0 {
        return Err(Error::config(format!("{section}.check_every"), "must be at least 1"));
    }
    if max_steps < check_every {
        return Err(Error::config(
            format!("{section}.max_steps"),
            format!("{max_steps} below check_every = {check_every}"),
        ));
    }
    Ok(())
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().message())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        if l.lx < 4 {
            return Err(Error::config("lattice.Lx", format!("{} below 4", l.lx)));
        }
        if l.ly < 4 {
            return Err(Error::config("lattice.Ly", format!("{} below 4", l.ly)));
        }
        if !(l.porosity > 0.0 && l.porosity <= 1.0) {
            return Err(Error::config(
                "lattice.porosity",
                format!("{} outside (0, 1]", l.porosity),
            ));
        }
        positive("lattice.dx_mm", l.dx_mm)?;

        let f = &self.flow;
        if !(f.tau > 0.5 && f.tau.is_finite()) {
            return Err(Error::config("flow.tau", format!("{} must exceed 0.5", f.tau)));
        }
        positive("flow.viscosity", f.viscosity)?;
        if !(f.inflow_velocity >= 0.0 && f.inflow_velocity.is_finite()) {
            return Err(Error::config(
                "flow.V",
                format!("{} must be non-negative", f.inflow_velocity),
            ));
        }
        steps("flow", f.max_steps, f.tolerance, f.check_every)?;
        let v_lat = self.scales().flow_velocity_to_lattice(f.inflow_velocity);
        if v_lat >= 0.1 {
            return Err(Error::config(
                "flow.V",
                format!("lattice inlet velocity {v_lat:.3e} outside the low-Mach range (< 0.1)"),
            ));
        }

        let a = &self.ade;
        if !(a.tau_d > 0.5 && a.tau_d.is_finite()) {
            return Err(Error::config("ade.tau_D", format!("{} must exceed 0.5", a.tau_d)));
        }
        positive("ade.D", a.diffusivity)?;
        if !(a.c_in >= 0.0 && a.c_in.is_finite()) {
            return Err(Error::config("ade.C_in", format!("{} must be non-negative", a.c_in)));
        }
        steps("ade", a.max_steps, a.tolerance, a.check_every)?;

        self.electro.validate("electro")?;
        self.biofilm.validate("biofilm")?;

        if self.run.hours == 0 {
            return Err(Error::config("run.hours", "must be at least 1"));
        }
        Ok(())
    }

    pub fn scales(&self) -> UnitScales {
        UnitScales::from_relaxation(
            self.lattice.dx_mm,
            self.flow.tau,
            self.flow.viscosity,
            self.ade.tau_d,
            self.ade.diffusivity,
        )
    }

    pub fn geometry_seed(&self) -> u64 {
        self.lattice.seed.unwrap_or(self.run.seed)
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            tau: self.flow.tau,
            inflow_velocity: self.scales().flow_velocity_to_lattice(self.flow.inflow_velocity),
            body_force: [0.0, 0.0],
            max_steps: self.flow.max_steps,
            tolerance: self.flow.tolerance,
            check_every: self.flow.check_every,
        }
    }

    pub fn ade_params(&self) -> AdeParams {
        AdeParams {
            tau_d: self.ade.tau_d,
            c_in: self.ade.c_in,
            sink_half_saturation: self.electro.k_s,
            max_steps: self.ade.max_steps,
            tolerance: self.ade.tolerance,
            check_every: self.ade.check_every,
        }
    }

    /// Liquid volume represented by one lattice cell, L.
    pub fn cell_volume(&self) -> f64 {
        self.electro.v_a / (self.lattice.lx * self.lattice.ly) as f64
    }
}

pub fn parse_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SimulationConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn empty_document_gives_reference_set() {
        let c = SimulationConfig::from_toml_str("").unwrap();
        assert_eq!(c, SimulationConfig::default());
        assert_eq!(c.electro.r_ext, 360.0);
        assert_eq!(c.electro.q_max, 8.48);
        assert_eq!(c.run.hours, 72);
        assert_eq!((c.lattice.lx, c.lattice.ly), (60, 65));
    }

    #[test]
    fn porosity_range_names_key() {
        let err = SimulationConfig::from_toml_str("[lattice]\nporosity = 1.5\n").unwrap_err();
        assert_eq!(key_of(err), "lattice.porosity");
    }

    #[test]
    fn unknown_key_names_path() {
        let err = SimulationConfig::from_toml_str("[electro]\nR_extt = 10.0\n").unwrap_err();
        assert!(key_of(err).starts_with("electro"));
    }

    #[test]
    fn type_mismatch_names_path() {
        let err = SimulationConfig::from_toml_str("[run]\nhours = \"many\"\n").unwrap_err();
        assert_eq!(key_of(err), "run.hours");
    }

    #[test]
    fn echo_round_trips() {
        let c = SimulationConfig::from_toml_str("[electro]\nR_ext = 360\n[run]\nhours = 3\n").unwrap();
        let echoed = c.to_toml_string();
        assert!(echoed.contains("R_ext = 360.0"));
        assert_eq!(SimulationConfig::from_toml_str(&echoed).unwrap(), c);
    }

    #[test]
    fn lattice_inlet_velocity() {
        let c = SimulationConfig::default();
        let v = c.flow_params().inflow_velocity;
        assert!((v - 9.957e-4).abs() < 1e-6, "{v}");
        assert!((c.cell_volume() - 1.7e-5).abs() < 1e-12);
    }
}
