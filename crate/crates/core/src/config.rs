//! Scenario, protocol and solver configuration.
//!
//! Every field has a default matching the reference scenario: a sub-6 GHz
//! medium (2.4 GHz, 10 MHz) paired with a mmWave medium (30 GHz, 100 MHz),
//! a 4-antenna AP per medium and a 16-element RIS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// How the line-of-sight phase of the Rician component is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosPhase {
    /// θ ~ N(0, 1), used for the RF (sub-6 GHz) medium.
    Gaussian,
    /// θ = 2π·d/λ, used for the mmWave medium.
    Propagation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    /// Total antenna gain G_i of the medium (device, RIS and AP together).
    pub antenna_gain_db: f64,
    pub rician_k_db: f64,
    pub los_phase: LosPhase,
}

impl Medium {
    pub fn sub6() -> Self {
        Medium {
            carrier_freq_hz: 2.4e9,
            bandwidth_hz: 10e6,
            antenna_gain_db: 10.0,
            rician_k_db: 5.0,
            los_phase: LosPhase::Gaussian,
        }
    }

    pub fn mmwave() -> Self {
        Medium {
            carrier_freq_hz: 30e9,
            bandwidth_hz: 100e6,
            antenna_gain_db: 20.0,
            rician_k_db: 10.0,
            los_phase: LosPhase::Propagation,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn rician_k_linear(&self) -> f64 {
        db_to_linear(self.rician_k_db)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite()) {
            return Err(Error::config(format!("{path}.carrier_freq_hz"), "must be positive and finite"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config(format!("{path}.bandwidth_hz"), "must be positive and finite"));
        }
        if !self.rician_k_db.is_finite() {
            return Err(Error::config(format!("{path}.rician_k_db"), "must be finite"));
        }
        if !self.antenna_gain_db.is_finite() {
            return Err(Error::config(format!("{path}.antenna_gain_db"), "must be finite"));
        }
        Ok(())
    }
}

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Node positions in meters. Devices sit on the lower row, APs on the upper row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub d1: Point,
    pub d2: Point,
    pub ap1: Point,
    pub ap2: Point,
    pub ris: Point,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            d1: [-25.0, -25.0],
            d2: [25.0, -25.0],
            ap1: [-25.0, 25.0],
            ap2: [25.0, 25.0],
            ris: [0.0, 0.0],
        }
    }
}

impl Geometry {
    pub fn device(&self, i: usize) -> Point {
        [self.d1, self.d2][i]
    }

    pub fn ap(&self, i: usize) -> Point {
        [self.ap1, self.ap2][i]
    }

    /// Device i to RIS distance.
    pub fn device_ris(&self, i: usize) -> f64 {
        distance(self.device(i), self.ris)
    }

    /// RIS to AP i distance.
    pub fn ris_ap(&self, i: usize) -> f64 {
        distance(self.ris, self.ap(i))
    }
}

/// Circuit power of each node, in mW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitPowers {
    pub d1_mw: f64,
    pub d2_mw: f64,
    pub ap1_mw: f64,
    pub ap2_mw: f64,
    /// Per reflecting element.
    pub ris_element_mw: f64,
}

impl Default for CircuitPowers {
    fn default() -> Self {
        // D1 and AP1 follow the B1/B2 ratio of their mmWave counterparts.
        CircuitPowers {
            d1_mw: 10.0,
            d2_mw: 100.0,
            ap1_mw: 200.0,
            ap2_mw: 2000.0,
            ris_element_mw: 5.0,
        }
    }
}

/// Knobs of the smoothed projected-ascent phase solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSolverParams {
    /// Number of smoothing stages.
    pub stages: usize,
    /// Smoothing parameter of the first stage, relative to the objective scale.
    pub lambda0: f64,
    /// Multiplicative increase of the smoothing parameter per stage.
    pub lambda_growth: f64,
    pub max_inner_iters: usize,
    /// Multiplier on the curvature-derived initial step.
    pub step_scale: f64,
    /// Relative improvement below which a stage stops.
    pub tolerance: f64,
    /// Phases per entry for the exhaustive grid oracle.
    pub oracle_grid: usize,
}

impl Default for PhaseSolverParams {
    fn default() -> Self {
        PhaseSolverParams {
            stages: 4,
            lambda0: 10.0,
            lambda_growth: 5.0,
            max_inner_iters: 200,
            step_scale: 1.0,
            tolerance: 1e-9,
            oracle_grid: 64,
        }
    }
}

impl PhaseSolverParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::config(format!("{path}.stages"), "must be at least 1"));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::config(format!("{path}.lambda0"), "must be positive"));
        }
        if !(self.lambda_growth >= 1.0 && self.lambda_growth.is_finite()) {
            return Err(Error::config(format!("{path}.lambda_growth"), "must be >= 1 (non-decreasing schedule)"));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::config(format!("{path}.max_inner_iters"), "must be at least 1"));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::config(format!("{path}.step_scale"), "must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config(format!("{path}.tolerance"), "must be positive"));
        }
        if self.oracle_grid < 2 {
            return Err(Error::config(format!("{path}.oracle_grid"), "must be at least 2"));
        }
        Ok(())
    }
}

/// Outer-loop settings shared by both iterative algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Time-grid resolution: Δt = 1/k_max.
    pub k_max: usize,
    /// Maximum outer iterations.
    pub t_max: usize,
    /// Relative stopping threshold: stop once F(t) − F(t−1) ≤ ero·F(t).
    pub ero: f64,
    pub phase: PhaseSolverParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k_max: 100,
            t_max: 100,
            ero: 1e-4,
            phase: PhaseSolverParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub media: [Medium; 2],
    pub geometry: Geometry,
    /// M, receive antennas at each AP.
    pub ap_antennas: usize,
    /// N, reflecting elements of the RIS.
    pub ris_elements: usize,
    pub ref_distance_m: f64,
    pub pathloss_exponent: f64,
    pub rho_si: f64,
    /// σ̃_i² / σ_i², the LI-plus-noise to noise power ratio.
    pub li_noise_ratio: f64,
    pub noise_psd_dbm_hz: f64,
    /// Reference power P: P1 = (B1/B2)·P2 = P.
    pub power_dbm: f64,
    /// AP power for the AP-based benchmark, same B-ratio convention. `None` tracks `power_dbm`.
    pub ap_power_dbm: Option<f64>,
    /// Channel estimation error coefficient ρ_e.
    pub rho_e: f64,
    pub circuit: CircuitPowers,
    pub solver: SolverConfig,
    /// Master seed for every random draw.
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            media: [Medium::sub6(), Medium::mmwave()],
            geometry: Geometry::default(),
            ap_antennas: 4,
            ris_elements: 16,
            ref_distance_m: 1.0,
            pathloss_exponent: 2.2,
            rho_si: 0.5,
            li_noise_ratio: 1.1,
            noise_psd_dbm_hz: -174.0,
            power_dbm: 23.0,
            ap_power_dbm: None,
            rho_e: 0.0,
            circuit: CircuitPowers::default(),
            solver: SolverConfig::default(),
            seed: 2024,
        }
    }
}

/// Transmit powers and noise powers implied by the equal-SNR convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedPowers {
    /// Device transmit powers P_1, P_2 in W.
    pub tx: [f64; 2],
    /// Noise powers σ_i² = B_i·N0 in W.
    pub noise: [f64; 2],
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.media[0].validate("system.media[0]")?;
        self.media[1].validate("system.media[1]")?;
        if self.ap_antennas < 1 {
            return Err(Error::config("system.ap_antennas", "M must be at least 1"));
        }
        if self.ris_elements < 1 {
            return Err(Error::config("system.ris_elements", "N must be at least 1"));
        }
        if !(self.ref_distance_m > 0.0 && self.ref_distance_m.is_finite()) {
            return Err(Error::config("system.ref_distance_m", "must be positive"));
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::config("system.pathloss_exponent", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rho_si) {
            return Err(Error::config("system.rho_si", "must lie in [0, 1]"));
        }
        if !(self.li_noise_ratio >= 1.0 && self.li_noise_ratio.is_finite()) {
            return Err(Error::config("system.li_noise_ratio", "must be >= 1"));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::config("system.noise_psd_dbm_hz", "must be finite"));
        }
        if !self.power_dbm.is_finite() {
            return Err(Error::config("system.power_dbm", "must be finite"));
        }
        if let Some(p) = self.ap_power_dbm {
            if !p.is_finite() {
                return Err(Error::config("system.ap_power_dbm", "must be finite"));
            }
        }
        if !(self.rho_e >= 0.0 && self.rho_e.is_finite()) {
            return Err(Error::config("system.rho_e", "must be non-negative"));
        }
        let c = &self.circuit;
        for (name, v) in [
            ("d1_mw", c.d1_mw),
            ("d2_mw", c.d2_mw),
            ("ap1_mw", c.ap1_mw),
            ("ap2_mw", c.ap2_mw),
            ("ris_element_mw", c.ris_element_mw),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("system.circuit.{name}"), "must be non-negative"));
            }
        }
        if self.solver.k_max < 2 {
            return Err(Error::config("system.solver.k_max", "must be at least 2"));
        }
        if self.solver.t_max < 1 {
            return Err(Error::config("system.solver.t_max", "must be at least 1"));
        }
        if !(self.solver.ero > 0.0 && self.solver.ero.is_finite()) {
            return Err(Error::config("system.solver.ero", "must be positive"));
        }
        self.solver.phase.validate("system.solver.phase")?;

        let g = &self.geometry;
        for i in 0..2 {
            for (what, d) in [("device-RIS", g.device_ris(i)), ("RIS-AP", g.ris_ap(i))] {
                if !(d >= self.ref_distance_m) {
                    return Err(Error::config(
                        "system.geometry",
                        format!("{what} distance for link {} is {d} m, below the reference distance", i + 1),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn bandwidths(&self) -> [f64; 2] {
        [self.media[0].bandwidth_hz, self.media[1].bandwidth_hz]
    }

    pub fn derived_powers(&self) -> DerivedPowers {
        derived_powers_for(self, self.power_dbm)
    }

    /// AP transmit powers of the AP-based benchmark.
    pub fn ap_powers(&self) -> [f64; 2] {
        derived_powers_for(self, self.ap_power_dbm.unwrap_or(self.power_dbm)).tx
    }
}

/// Equal-SNR power split: P1/σ1² = P2/σ2², with P1 = P.
pub fn derived_powers(config: &SystemConfig) -> DerivedPowers {
    config.derived_powers()
}

fn derived_powers_for(config: &SystemConfig, reference_dbm: f64) -> DerivedPowers {
    let [b1, b2] = config.bandwidths();
    let p1 = dbm_to_watt(reference_dbm);
    let n0 = dbm_to_watt(config.noise_psd_dbm_hz);
    DerivedPowers {
        tx: [p1, p1 * b2 / b1],
        noise: [b1 * n0, b2 * n0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults_validate() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn powers_follow_bandwidth_ratio() {
        let p = SystemConfig::default().derived_powers();
        // 23 dBm = 10^(-0.7) W.
        assert!((p.tx[0] - 0.199_526_231_5).abs() < 1e-9);
        assert!((p.tx[1] - 1.995_262_315).abs() < 1e-8);
        assert!((p.tx[0] / p.noise[0] - p.tx[1] / p.noise[1]).abs() / (p.tx[0] / p.noise[0]) < 1e-12);
        assert!((watt_to_dbm(p.noise[0]) + 104.0).abs() < 1e-9);
    }

    #[test]
    fn equal_bandwidths_give_equal_powers() {
        let mut c = SystemConfig::default();
        c.media[1].bandwidth_hz = c.media[0].bandwidth_hz;
        let p = c.derived_powers();
        assert_eq!(p.tx[0], p.tx[1]);
    }

    #[test]
    fn zero_elements_rejected_with_path() {
        let c = SystemConfig {
            ris_elements: 0,
            ..SystemConfig::default()
        };
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("system.ris_elements"), "{err}");
    }

    #[test]
    fn ris_on_top_of_device_rejected() {
        let mut c = SystemConfig::default();
        c.geometry.ris = c.geometry.d1;
        assert!(c.validate().is_err());
    }
}
