//! Benchmark schemes and energy-efficiency accounting.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{
    end_to_end_objective, optimize_delay_constrained, optimize_p1, optimize_p2, solve_rate_lp, Allocation, SlotWeights,
    Solution,
};
use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::link::{capacity, Device, DownlinkSource, LinkModel, PhaseVector};

/// RNG stream reserved for random phase draws, so they never overlap channel draws.
const PHASE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    P1,
    P2,
    EqualT,
    RandPhi,
    #[serde(rename = "2bitPhi")]
    TwoBitPhi,
    #[serde(rename = "AP")]
    ApBased,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::P1,
        Scheme::P2,
        Scheme::EqualT,
        Scheme::RandPhi,
        Scheme::TwoBitPhi,
        Scheme::ApBased,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::P1 => "P1",
            Scheme::P2 => "P2",
            Scheme::EqualT => "EqualT",
            Scheme::RandPhi => "RandPhi",
            Scheme::TwoBitPhi => "2bitPhi",
            Scheme::ApBased => "AP",
        }
    }

    pub fn power_model(self) -> PowerModel {
        match self {
            Scheme::ApBased => PowerModel::ApBased,
            _ => PowerModel::RisBased,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerModel {
    /// Devices and the RIS.
    RisBased,
    /// Devices, the RIS and both APs.
    ApBased,
}

/// Transmit and circuit powers in W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub device_tx: [f64; 2],
    pub ap_tx: [f64; 2],
    pub device_circuit: [f64; 2],
    pub ap_circuit: [f64; 2],
    pub ris_element_circuit: f64,
    pub elements: usize,
}

impl PowerBudget {
    pub fn from_config(config: &SystemConfig) -> Self {
        let c = &config.circuit;
        let mw = |v: f64| v * 1e-3;
        PowerBudget {
            device_tx: config.derived_powers().tx,
            ap_tx: config.ap_powers(),
            device_circuit: [mw(c.d1_mw), mw(c.d2_mw)],
            ap_circuit: [mw(c.ap1_mw), mw(c.ap2_mw)],
            ris_element_circuit: mw(c.ris_element_mw),
            elements: config.ris_elements,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .device_tx
            .iter()
            .chain(&self.ap_tx)
            .chain(&self.device_circuit)
            .chain(&self.ap_circuit)
            .chain(std::iter::once(&self.ris_element_circuit));
        if all.clone().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("power budget entries must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Σ(P_Di + P^c_Di) + N·P^c_RIS, plus Σ(P_APi + P^c_APi) for the AP-based model.
pub fn total_power(model: PowerModel, budget: &PowerBudget) -> f64 {
    let devices: f64 = (0..2).map(|i| budget.device_tx[i] + budget.device_circuit[i]).sum();
    let ris = budget.elements as f64 * budget.ris_element_circuit;
    let aps: f64 = (0..2).map(|i| budget.ap_tx[i] + budget.ap_circuit[i]).sum();
    match model {
        PowerModel::RisBased => devices + ris,
        PowerModel::ApBased => devices + ris + aps,
    }
}

/// Bits per frame over W with a 1 s frame, i.e. bit/J.
pub fn energy_efficiency(objective_bits: f64, total_power_w: f64) -> Result<f64> {
    if !(total_power_w > 0.0) {
        return Err(Error::Domain(format!("total power must be positive, got {total_power_w}")));
    }
    Ok(objective_bits / total_power_w)
}

/// Downlink capacity when AP_i transmits through the RIS to device i.
pub fn ap_downlink_capacity(config: &SystemConfig, channels: &ChannelSet, phase: &PhaseVector, dev: Device) -> Result<f64> {
    let model = LinkModel::new(config, channels)?.with_downlink_source(DownlinkSource::Ap);
    let i = dev.index();
    let s = model.cascade_downlink(phase, dev)?.norm_sqr();
    let noise = channels.devices[i].noise_down;
    let gamma = s / (config.rho_si * s + noise);
    Ok(capacity(config.bandwidths()[i], gamma))
}

/// Nearest of {0, π/2, π, 3π/2} to each entry's angle; ties and zero entries go to the smaller angle.
pub fn quantize_phase_2bit(phi: &PhaseVector) -> PhaseVector {
    let angles: Vec<f64> = phi
        .entries()
        .iter()
        .map(|z| {
            if z.norm() == 0.0 {
                return 0.0;
            }
            let u = z / z.norm();
            let mut best = (0.0, f64::INFINITY);
            for k in 0..4 {
                let q = k as f64 * FRAC_PI_2;
                let d = (Complex64::from_polar(1.0, q) - u).norm();
                if d < best.1 - 1e-12 {
                    best = (q, d);
                }
            }
            best.0
        })
        .collect();
    PhaseVector::from_angles(&angles)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// Minimum throughput in bits per frame.
    pub objective: f64,
    /// Bit/J.
    pub energy_efficiency: f64,
    pub total_power: f64,
    pub solution: Solution,
}

fn finish(scheme: Scheme, config: &SystemConfig, solution: Solution) -> Result<SchemeResult> {
    let budget = PowerBudget::from_config(config);
    let total = total_power(scheme.power_model(), &budget);
    Ok(SchemeResult {
        scheme,
        objective: solution.objective,
        energy_efficiency: energy_efficiency(solution.objective, total)?,
        total_power: total,
        solution,
    })
}

/// Evaluates a fixed phase at a fixed split with LP rates.
fn fixed_phase_solution(model: &LinkModel<'_>, phase: PhaseVector, slots: SlotWeights) -> Result<Solution> {
    let caps = model.capacities(&phase)?;
    let rates = solve_rate_lp(&caps, slots);
    let objective = end_to_end_objective(&rates, slots);
    Ok(Solution {
        phase,
        slots,
        rates,
        capacities: caps,
        objective,
        trace: vec![objective],
        iterations: 0,
        converged: true,
    })
}

/// The AP-based benchmark: AP downlinks through the RIS with T1 = T2 = 1.
pub fn optimize_ap_based(config: &SystemConfig, channels: &ChannelSet) -> Result<SchemeResult> {
    let model = LinkModel::new(config, channels)?.with_downlink_source(DownlinkSource::Ap);
    let solution = optimize_delay_constrained(&model, config, &[SlotWeights::new(1.0, 1.0)])?;
    finish(Scheme::ApBased, config, solution)
}

/// 2-bit version of a continuous delay-constrained solution at the same split.
pub fn quantized_solution(config: &SystemConfig, channels: &ChannelSet, continuous: &Solution) -> Result<Solution> {
    let model = LinkModel::new(config, channels)?;
    fixed_phase_solution(&model, quantize_phase_2bit(&continuous.phase), continuous.slots)
}

/// Uniform random unit-modulus phases from `seed`.
pub fn random_phase(n: usize, seed: u64) -> PhaseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PHASE_STREAM);
    let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    PhaseVector::from_angles(&angles)
}

/// Runs one scheme on one realization. `seed` only affects RandPhi.
pub fn run_scheme(scheme: Scheme, config: &SystemConfig, channels: &ChannelSet, seed: u64) -> Result<SchemeResult> {
    let half = Allocation::new(0.5, 0.5)?.slots();
    match scheme {
        Scheme::P1 => finish(scheme, config, optimize_p1(config, channels)?),
        Scheme::P2 => finish(scheme, config, optimize_p2(config, channels)?),
        Scheme::EqualT => {
            let model = LinkModel::new(config, channels)?;
            finish(scheme, config, optimize_delay_constrained(&model, config, &[half])?)
        }
        Scheme::RandPhi => {
            let model = LinkModel::new(config, channels)?;
            let phase = random_phase(model.elements(), seed);
            finish(scheme, config, fixed_phase_solution(&model, phase, half)?)
        }
        Scheme::TwoBitPhi => {
            let p2 = optimize_p2(config, channels)?;
            finish(scheme, config, quantized_solution(config, channels, &p2)?)
        }
        Scheme::ApBased => optimize_ap_based(config, channels),
    }
}

/// Degraded schemes only.
pub fn run_baseline(scheme: Scheme, config: &SystemConfig, channels: &ChannelSet, seed: u64) -> Result<SchemeResult> {
    match scheme {
        Scheme::EqualT | Scheme::RandPhi | Scheme::TwoBitPhi => run_scheme(scheme, config, channels, seed),
        other => Err(Error::InvalidInput(format!("`{other}` is not a baseline"))),
    }
}
