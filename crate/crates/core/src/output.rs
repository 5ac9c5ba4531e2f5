//! On-disk artifacts: the hourly CSV, field snapshots, greymaps, the run
//! manifest and checkpoints.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::sim::{ElectricalRecord, HourFields, SimulationState, Termination};

pub const TIMESERIES_HEADER: &str =
    "hour,I_mA,V_mV,n_conc_V,n_act_V,Mred_frac,Mox_frac,total_biomass_mg,mean_Cs_mgL";

const CHECKPOINT_FORMAT: &str = "mfc-lbm-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// `printf("%.9g")`.
pub fn format_g9(x: f64) -> String {
    const P: i32 = 9;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn timeseries_csv(records: &[ElectricalRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let row = [
            r.current * 1e3,
            r.voltage * 1e3,
            r.n_conc,
            r.n_act,
            r.mred_frac,
            r.mox_frac,
            r.total_biomass,
            r.mean_substrate,
        ];
        out.push_str(&r.hour.to_string());
        for v in row {
            out.push(',');
            out.push_str(&format_g9(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_timeseries(records: &[ElectricalRecord], path: &Path) -> Result<()> {
    write_file(path, timeseries_csv(records).as_bytes())
}

/// Row `y` per line, `x` along the line.
pub fn matrix_csv(width: usize, values: &[f64]) -> String {
    let mut out = String::new();
    for row in values.chunks(width) {
        for (x, v) in row.iter().enumerate() {
            if x > 0 {
                out.push(',');
            }
            out.push_str(&format_g9(*v));
        }
        out.push('\n');
    }
    out
}

/// Binary 8-bit greymap scaled from `[min, max]` of the field; a constant
/// field maps to black. Returns the bytes and the range used.
pub fn greymap(width: usize, height: usize, values: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let span = max - min;
    out.extend(values.iter().map(|&v| {
        if span > 0.0 {
            ((v - min) / span * 255.0).round() as u8
        } else {
            0
        }
    }));
    (out, min, max)
}

/// Named fields of one hour: velocity in mm/s, density in lattice units,
/// substrate and biomass in mg/L.
pub fn snapshot_fields(fields: &HourFields, config: &SimulationConfig) -> Vec<(&'static str, Vec<f64>)> {
    let s = config.scales();
    let to_mm_s = s.dx_mm / s.dt_flow_s;
    vec![
        ("ux", fields.flow.u.iter().map(|u| u[0] * to_mm_s).collect()),
        ("uy", fields.flow.u.iter().map(|u| u[1] * to_mm_s).collect()),
        ("rho", fields.flow.rho.clone()),
        ("conc", fields.conc.conc.clone()),
        ("cbio", fields.c_bio.clone()),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub program: String,
    pub version: String,
    pub seed: u64,
    pub geometry_seed: u64,
    pub config: SimulationConfig,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub hours_completed: usize,
    pub termination: Option<Termination>,
    pub error: Option<String>,
    /// Files written by this invocation, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Greymap normalisation ranges by file name.
    pub greymap_ranges: BTreeMap<String, Range>,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Collects every artifact of a run in one directory.
#[derive(Debug)]
pub struct OutputWriter {
    dir: PathBuf,
    pgm: bool,
    artifacts: Vec<String>,
    ranges: BTreeMap<String, Range>,
    started: u64,
}

impl OutputWriter {
    pub fn create(dir: &Path, pgm: bool) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            pgm,
            artifacts: Vec::new(),
            ranges: BTreeMap::new(),
            started: unix_now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), bytes)?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(())
    }

    pub fn timeseries(&mut self, records: &[ElectricalRecord]) -> Result<()> {
        self.put("outputs.csv", timeseries_csv(records).as_bytes())
    }

    pub fn snapshot(&mut self, fields: &HourFields, config: &SimulationConfig) -> Result<()> {
        let (w, h) = (fields.lattice.width(), fields.lattice.height());
        let hour = fields.hour;
        for (name, values) in snapshot_fields(fields, config) {
            self.put(&format!("{name}_h{hour}.csv"), matrix_csv(w, &values).as_bytes())?;
            if self.pgm {
                let (bytes, min, max) = greymap(w, h, &values);
                let file = format!("{name}_h{hour}.pgm");
                self.put(&file, &bytes)?;
                self.ranges.insert(file, Range { min, max });
            }
        }
        self.put(&format!("geom_h{hour}.txt"), fields.lattice.to_mask().as_bytes())
    }

    pub fn checkpoint(&mut self, config: &SimulationConfig, state: &SimulationState) -> Result<()> {
        let path = self.dir.join("checkpoint.json");
        save_checkpoint(&path, config, state)?;
        if !self.artifacts.iter().any(|a| a == "checkpoint.json") {
            self.artifacts.push("checkpoint.json".into());
        }
        Ok(())
    }

    /// Writes `manifest.json`, which lists every other file written.
    pub fn finish(
        &mut self,
        config: &SimulationConfig,
        state: Option<&SimulationState>,
        error: Option<&Error>,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            program: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.run.seed,
            geometry_seed: config.geometry_seed(),
            config: config.clone(),
            started_unix_s: self.started,
            finished_unix_s: unix_now(),
            hours_completed: state.map_or(0, |s| s.hour),
            termination: state.and_then(|s| s.termination),
            error: error.map(|e| e.to_string()),
            artifacts: self.artifacts.clone(),
            greymap_ranges: self.ranges.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        write_file(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: SimulationConfig,
    state: SimulationState,
}

pub fn save_checkpoint(path: &Path, config: &SimulationConfig, state: &SimulationState) -> Result<()> {
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        state: state.clone(),
    };
    let text = serde_json::to_string(&ckpt).map_err(|e| Error::Checkpoint(e.to_string()))?;
    write_file(path, text.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<(SimulationConfig, SimulationState)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported container {} v{}",
            ckpt.format, ckpt.version
        )));
    }
    ckpt.state.lattice_matches(&ckpt.config)?;
    Ok((ckpt.config, ckpt.state))
}

/// Reads a geometry mask file.
pub fn load_geometry(path: &Path) -> Result<Lattice> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lattice::from_mask(&text)
}

/// Formats a one-line summary of an hour for progress logs.
pub fn progress_line(r: &ElectricalRecord) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "hour {:>3}  I = {} mA  V = {} mV  Mox = {}  biomass = {} mg  Cs = {} mg/L",
        r.hour,
        format_g9(r.current * 1e3),
        format_g9(r.voltage * 1e3),
        format_g9(r.mox_frac),
        format_g9(r.total_biomass),
        format_g9(r.mean_substrate),
    );
    s
}
