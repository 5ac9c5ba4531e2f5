//! Mediator bookkeeping, double Monod kinetics, overpotentials and the
//! external circuit.
//!
//! Mediator amounts are stored per unit biomass (mg mediator / mg biomass),
//! only in oxidised form; the reduced form is always `m_total - m_ox`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced mediator below `MEDIATOR_FLOOR * m_total` counts as depleted.
pub const MEDIATOR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectroParams {
    /// mg mediator / mg biomass
    #[serde(rename = "M_total")]
    pub m_total: f64,
    /// mg mediator / mg substrate
    #[serde(rename = "Y")]
    pub yield_mediator: f64,
    /// mg mediator / mol mediator
    pub gamma: f64,
    /// electrons per mediator molecule
    pub m: u32,
    /// C/mol
    #[serde(rename = "F")]
    pub faraday: f64,
    /// anode compartment volume, L
    #[serde(rename = "V_a")]
    pub v_a: f64,
    /// mg substrate / mg biomass / day
    pub q_max: f64,
    /// mg substrate / L
    #[serde(rename = "K_s")]
    pub k_s: f64,
    /// Oxidised-mediator half saturation. Defaults to `0.02 * M_total`.
    #[serde(rename = "K_Mox")]
    pub k_mox: Option<f64>,
    /// A/m^2
    #[serde(rename = "I_0")]
    pub i_0: f64,
    /// m^2
    #[serde(rename = "A_a")]
    pub a_a: f64,
    /// V
    #[serde(rename = "E_0")]
    pub e_0: f64,
    /// ohm
    #[serde(rename = "R_int")]
    pub r_int: f64,
    /// ohm
    #[serde(rename = "R_ext")]
    pub r_ext: f64,
    /// J/(mol K)
    #[serde(rename = "R")]
    pub gas_constant: f64,
    /// K
    #[serde(rename = "T")]
    pub temperature: f64,
    /// Current-bounding constant. Defaults to `1e-4 * M_total`.
    pub epsilon: Option<f64>,
}

impl Default for ElectroParams {
    fn default() -> Self {
        Self {
            m_total: 0.05,
            yield_mediator: 0.5687,
            gamma: 663_400.0,
            m: 2,
            faraday: 96_485.0,
            v_a: 0.017 * 0.060 * 0.065 * 1000.0,
            q_max: 8.48,
            k_s: 20.0,
            k_mox: None,
            i_0: 0.001,
            a_a: 2.0 * 0.048 * 0.065,
            e_0: 0.7,
            r_int: 360.0,
            r_ext: 360.0,
            gas_constant: 8.314,
            temperature: 298.15,
            epsilon: None,
        }
    }
}

impl ElectroParams {
    pub fn k_mox(&self) -> f64 {
        self.k_mox.unwrap_or(0.02 * self.m_total)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1e-4 * self.m_total)
    }

    /// RT/F in volts.
    pub fn thermal_voltage(&self) -> f64 {
        self.gas_constant * self.temperature / self.faraday
    }

    pub fn validate(&self, section: &str) -> Result<()> {
        let positive = [
            ("M_total", self.m_total),
            ("Y", self.yield_mediator),
            ("gamma", self.gamma),
            ("F", self.faraday),
            ("V_a", self.v_a),
            ("q_max", self.q_max),
            ("K_s", self.k_s),
            ("K_Mox", self.k_mox()),
            ("I_0", self.i_0),
            ("A_a", self.a_a),
            ("E_0", self.e_0),
            ("R_int", self.r_int),
            ("R_ext", self.r_ext),
            ("R", self.gas_constant),
            ("T", self.temperature),
            ("epsilon", self.epsilon()),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(
                    format!("{section}.{key}"),
                    format!("must be a positive number, got {value}"),
                ));
            }
        }
        if self.m == 0 {
            return Err(Error::config(format!("{section}.m"), "must be at least 1"));
        }
        Ok(())
    }
}

/// Double Monod consumption rate, mg substrate / mg biomass / day.
pub fn monod_rate(c_s: f64, m_ox: f64, p: &ElectroParams) -> f64 {
    let c_s = c_s.max(0.0);
    let m_ox = m_ox.max(0.0);
    p.q_max * (c_s / (c_s + p.k_s)) * (m_ox / (m_ox + p.k_mox()))
}

fn is_depleted(m_total: f64, m_red: f64) -> bool {
    !(m_red >= MEDIATOR_FLOOR * m_total)
}

/// Nernst concentration loss `(RT/F) ln(m_total / m_red)`, volts.
pub fn concentration_overpotential(m_total: f64, m_red: f64, p: &ElectroParams) -> Result<f64> {
    if is_depleted(m_total, m_red) {
        return Err(Error::MediatorDepleted);
    }
    Ok(p.thermal_voltage() * (m_total / m_red).ln())
}

/// Linearised Butler–Volmer loss, volts.
pub fn activation_overpotential(
    current: f64,
    m_ox: f64,
    m_red: f64,
    p: &ElectroParams,
) -> Result<f64> {
    if is_depleted(p.m_total, m_red) {
        return Err(Error::MediatorDepleted);
    }
    Ok(current * activation_resistance(m_ox, m_red, p))
}

/// `n_act / I`: the activation loss is linear in the current.
fn activation_resistance(m_ox: f64, m_red: f64, p: &ElectroParams) -> f64 {
    p.thermal_voltage() / p.m as f64 * (m_ox / m_red) / (p.a_a * p.i_0)
}

/// Current from the circuit balance with the activation loss substituted.
/// Both equations are linear in `I`, so
/// `I = s (E_0 - n_conc) / (R_int + R_ext + s K)` with `s = m_red/(eps + m_red)`.
pub fn solve_cell_current(n_conc: f64, m_ox: f64, m_red: f64, p: &ElectroParams) -> f64 {
    if is_depleted(p.m_total, m_red) {
        return 0.0;
    }
    let s = m_red / (p.epsilon() + m_red);
    let k = activation_resistance(m_ox, m_red, p);
    let current = s * (p.e_0 - n_conc) / (p.r_int + p.r_ext + s * k);
    current.max(0.0)
}

/// Load voltage, `I * R_ext`.
pub fn cell_voltage(current: f64, p: &ElectroParams) -> f64 {
    current * p.r_ext
}

/// Biomass-weighted oxidised mediator over all biofilm cells, per unit
/// biomass. With no biomass the pool is taken as fully oxidised.
pub fn mean_oxidised(biomass: &[f64], m_ox: &[f64], p: &ElectroParams) -> f64 {
    let total: f64 = biomass.iter().sum();
    if !(total > 0.0) {
        return p.m_total;
    }
    let weighted: f64 = biomass.iter().zip(m_ox).map(|(b, m)| b * m).sum();
    (weighted / total).clamp(0.0, p.m_total)
}

/// Circuit outputs for one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitState {
    pub current: f64,
    pub voltage: f64,
    pub n_conc: f64,
    pub n_act: f64,
    pub mox_frac: f64,
    pub mred_frac: f64,
}

/// Solves the circuit for the aggregate mediator state. Overpotentials are
/// reported as zero when no current can flow (no biomass or depleted
/// reduced mediator).
pub fn solve_circuit(biomass: &[f64], m_ox: &[f64], p: &ElectroParams) -> CircuitState {
    let ox = mean_oxidised(biomass, m_ox, p);
    let mox_frac = ox / p.m_total;
    let mred_frac = 1.0 - mox_frac;
    let red = p.m_total - ox;
    let zero = CircuitState {
        current: 0.0,
        voltage: 0.0,
        n_conc: 0.0,
        n_act: 0.0,
        mox_frac,
        mred_frac,
    };
    let Ok(n_conc) = concentration_overpotential(p.m_total, red, p) else {
        return zero;
    };
    let current = solve_cell_current(n_conc, ox, red, p);
    let n_act = activation_overpotential(current, ox, red, p).unwrap_or(0.0);
    CircuitState {
        current,
        voltage: cell_voltage(current, p),
        n_conc,
        n_act,
        mox_frac,
        mred_frac,
    }
}

/// Mediator balance over one outer step of `dt_h` hours.
///
/// `biomass` holds each cell's biomass mass (mg) and `q` its consumption
/// rate (per day). Reduction is `Y q dt/24`. Reoxidation hands each cell the
/// share `b/B` of the current and divides by the compartment biomass
/// `V_a C_bio = B`. Returns how many cells were clamped to `[0, m_total]`.
pub fn update_mediator(
    biomass: &[f64],
    q: &[f64],
    m_ox: &mut [f64],
    current: f64,
    p: &ElectroParams,
    dt_h: f64,
) -> usize {
    let total: f64 = biomass.iter().sum();
    let charge_mass = p.gamma * current * dt_h * 3600.0 / (p.m as f64 * p.faraday);
    let mut clamped = 0;
    for ((&b, &qc), mox) in biomass.iter().zip(q).zip(m_ox.iter_mut()) {
        if !(b > 0.0) {
            continue;
        }
        let reduction = p.yield_mediator * qc * dt_h / 24.0;
        let reoxidation = if total > 0.0 {
            charge_mass * (b / total) / total
        } else {
            0.0
        };
        let next = *mox - reduction + reoxidation;
        if next < 0.0 || next > p.m_total {
            clamped += 1;
        }
        *mox = next.clamp(0.0, p.m_total);
    }
    clamped
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ElectroParams {
        ElectroParams::default()
    }

    #[test]
    fn monod_zero_substrate() {
        assert_eq!(monod_rate(0.0, 0.05, &table()), 0.0);
    }

    #[test]
    fn monod_half_saturation() {
        let p = table();
        assert!((monod_rate(p.k_s, p.k_mox(), &p) - 2.12).abs() < 1e-12);
    }

    #[test]
    fn monod_inlet_value() {
        // 8.48 * 410/430 * 0.05/0.051
        let q = monod_rate(410.0, 0.05, &table());
        assert!((q - 7.927).abs() < 5e-4, "{q}");
    }

    #[test]
    fn nernst_at_half_reduction() {
        let p = table();
        let n = concentration_overpotential(0.05, 0.025, &p).unwrap();
        assert!((n - 0.01781).abs() < 1e-5, "{n}");
        assert_eq!(concentration_overpotential(0.05, 0.05, &p).unwrap(), 0.0);
        assert!(matches!(
            concentration_overpotential(0.05, 0.0, &p),
            Err(Error::MediatorDepleted)
        ));
    }

    #[test]
    fn activation_is_linear_in_current() {
        let p = table();
        assert_eq!(activation_overpotential(0.0, 0.02, 0.03, &p).unwrap(), 0.0);
        assert_eq!(activation_overpotential(1e-3, 0.0, 0.05, &p).unwrap(), 0.0);
        let a = activation_overpotential(1e-3, 0.02, 0.03, &p).unwrap();
        let b = activation_overpotential(2e-3, 0.02, 0.03, &p).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn no_reduced_mediator_no_current() {
        assert_eq!(solve_cell_current(0.0, 0.05, 0.0, &table()), 0.0);
    }

    #[test]
    fn ohmic_load() {
        let p = table();
        assert_eq!(cell_voltage(0.0, &p), 0.0);
        assert!((cell_voltage(0.91e-3, &p) - 0.3276).abs() < 1e-12);
        assert!((cell_voltage(1e-3, &p) - 0.36).abs() < 1e-12);
    }

    #[test]
    fn reduction_step() {
        // a roomy pool so the raw decrement is visible
        let p = ElectroParams {
            m_total: 10.0,
            k_mox: Some(0.001),
            ..table()
        };
        let mut mox = [1.0];
        let clamped = update_mediator(&[1.0], &[7.927], &mut mox, 0.0, &p, 1.0);
        assert_eq!(clamped, 0);
        assert!((mox[0] - 1.0 + 0.18784).abs() < 1e-5, "{}", mox[0]);

        let p = table();
        let mut mox = [0.05];
        assert_eq!(update_mediator(&[1.0], &[7.927], &mut mox, 0.0, &p, 1.0), 1);
        assert_eq!(mox[0], 0.0);
    }

    #[test]
    fn idle_update_leaves_mediator() {
        let p = table();
        let mut mox = [0.031, 0.002];
        assert_eq!(update_mediator(&[2.0, 3.0], &[0.0, 0.0], &mut mox, 0.0, &p, 1.0), 0);
        assert_eq!(mox, [0.031, 0.002]);
    }

    #[test]
    fn aggregates_without_biomass() {
        let p = table();
        let c = solve_circuit(&[], &[], &p);
        assert_eq!((c.current, c.mox_frac, c.mred_frac), (0.0, 1.0, 0.0));
    }

    #[test]
    fn validation_names_key() {
        let p = ElectroParams {
            r_ext: -1.0,
            ..table()
        };
        match p.validate("electro") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "electro.R_ext"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_defaults() {
        let p = table();
        assert!((p.k_mox() - 0.001).abs() < 1e-15);
        assert!((p.v_a - 0.0663).abs() < 1e-12);
        assert!((p.a_a - 6.24e-3).abs() < 1e-12);
        assert!((p.thermal_voltage() - 0.025_691).abs() < 1e-6);
    }
}
