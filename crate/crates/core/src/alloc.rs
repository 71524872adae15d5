//! Time allocation, rate assignment and the two outer alternating algorithms.
//!
//! Both algorithms alternate between refreshing the MMSE receivers / WMMSE
//! weights at the current phase vector and re-solving the max-min phase
//! subproblem. P1 has no delay constraints, so rates simply follow the
//! capacities. P2 adds the relay causality constraints and obtains rates from a
//! small linear program.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::link::{Capacities, LinkModel, LinkRates, PhaseVector, QuadForm};
use crate::phase::{round_feasible, solve_maxmin_phase};

const SUM_TOL: f64 = 1e-12;
const LP_BISECTION_ITERS: usize = 60;

pub type RateVector = LinkRates;

/// Frame split T1 + T2 = 1 with both slots nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    t1: f64,
    t2: f64,
}

impl Allocation {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 > 0.0 && t1 < 1.0 && t2 > 0.0 && t2 < 1.0) || (t1 + t2 - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!("allocation ({t1}, {t2}) must lie in (0,1) and sum to 1")));
        }
        Ok(Allocation { t1, t2 })
    }

    pub fn from_t1(t1: f64) -> Result<Self> {
        Self::new(t1, 1.0 - t1)
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn slots(&self) -> SlotWeights {
        SlotWeights::new(self.t1, self.t2)
    }
}

/// Slot durations multiplying the link rates. Unlike [`Allocation`] these need
/// not sum to one; the AP-based scheme uses (1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotWeights {
    pub t1: f64,
    pub t2: f64,
}

impl SlotWeights {
    pub fn new(t1: f64, t2: f64) -> Self {
        SlotWeights { t1, t2 }
    }

    /// Per-term multipliers (1U, 2U, 1D, 2D) of the throughput terms.
    pub fn term_weights(&self) -> [f64; 4] {
        [self.t2, self.t1, self.t1, self.t2]
    }

    /// Term multipliers under which the delay-constrained LP value is the
    /// minimum of the weighted capacities.
    pub fn delay_aware_weights(&self) -> [f64; 4] {
        let (t1, t2) = (self.t1, self.t2);
        [t2, t1, t1.min(t1 * t1 / t2), t2.min(t2 * t2 / t1)]
    }
}

impl From<Allocation> for SlotWeights {
    fn from(a: Allocation) -> Self {
        a.slots()
    }
}

/// min{v1U·T2, v2U·T1, v1D·T1, v2D·T2} in bits per frame.
pub fn end_to_end_objective(values: &LinkRates, slots: SlotWeights) -> f64 {
    values
        .to_array()
        .iter()
        .zip(slots.term_weights())
        .map(|(v, w)| v * w)
        .fold(f64::INFINITY, f64::min)
}

/// T1 = k/k_max for k = 1..k_max−1.
pub fn time_grid(k_max: usize) -> Result<Vec<Allocation>> {
    if k_max < 2 {
        return Err(Error::InvalidInput(format!("k_max must be at least 2, got {k_max}")));
    }
    (1..k_max).map(|k| Allocation::from_t1(k as f64 / k_max as f64)).collect()
}

/// R1U = R2D = min(C1U, C2D); R2U = R1D = min(C2U, C1D).
pub fn p1_rate_assignment(caps: &Capacities) -> RateVector {
    let a = caps.up[0].min(caps.down[1]);
    let b = caps.up[1].min(caps.down[0]);
    LinkRates::new(a, b, b, a)
}

fn lp_feasible(caps: &Capacities, slots: SlotWeights, t: f64) -> bool {
    let (t1, t2) = (slots.t1, slots.t2);
    let [c1u, c2u] = caps.up;
    let [c1d, c2d] = caps.down;
    // Downlinks at capacity leave the most room for the relayed uplinks.
    let r1u_max = c1u.min(c2d * t2 / t1);
    let r2u_max = c2u.min(c1d * t1 / t2);
    r1u_max * t2 >= t && r2u_max * t1 >= t && c1d * t1 >= t && c2d * t2 >= t
}

/// Optimal value of the delay-constrained rate LP, by bisection on t.
pub fn rate_lp_value(caps: &Capacities, slots: SlotWeights) -> f64 {
    let mut hi = end_to_end_objective(caps, slots);
    if !(hi > 0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    if lp_feasible(caps, slots, hi) {
        return hi;
    }
    for _ in 0..LP_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if lp_feasible(caps, slots, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Rates maximizing the minimum throughput subject to 0 ≤ R ≤ C and
/// R1U·T1 ≤ R2D·T2, R2U·T2 ≤ R1D·T1. Zero rates if any capacity is zero.
pub fn solve_rate_lp(caps: &Capacities, slots: SlotWeights) -> RateVector {
    if caps.to_array().iter().any(|c| !(*c > 0.0)) {
        return LinkRates::default();
    }
    let (t1, t2) = (slots.t1, slots.t2);
    let [c1u, c2u] = caps.up;
    let [c1d, c2d] = caps.down;
    let mut r1u = c1u.min(c2d * t2 / t1);
    let mut r2u = c2u.min(c1d * t1 / t2);
    // Keep the delay inequalities exact after rounding.
    while r1u * t1 > c2d * t2 {
        r1u = r1u.next_down();
    }
    while r2u * t2 > c1d * t1 {
        r2u = r2u.next_down();
    }
    let rates = LinkRates::new(r1u, r2u, c1d, c2d);
    debug_assert!({
        let v = rate_lp_value(caps, slots);
        (end_to_end_objective(&rates, slots) - v).abs() <= 1e-9 * v.max(1.0)
    });
    rates
}

/// Output of one outer optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub phase: PhaseVector,
    pub slots: SlotWeights,
    pub rates: RateVector,
    pub capacities: Capacities,
    /// Minimum throughput F in bits per frame.
    pub objective: f64,
    /// F after initialization and after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// True when the relative stopping rule fired before `t_max`.
    pub converged: bool,
}

fn argmax_slots<F>(grid: &[SlotWeights], mut value: F) -> (usize, f64)
where
    F: FnMut(SlotWeights) -> f64,
{
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &s) in grid.iter().enumerate() {
        let v = value(s);
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

fn scale_forms(base: &[QuadForm; 4], weights: [f64; 4]) -> Vec<QuadForm> {
    base.iter().zip(weights).map(|(f, w)| f.scaled(w)).collect()
}

fn stop(f_t: f64, f_prev: f64, ero: f64) -> bool {
    f_t - f_prev <= ero * f_t
}

/// Alternating optimization without delay constraints.
pub fn optimize_p1(config: &SystemConfig, channels: &ChannelSet) -> Result<Solution> {
    let model = LinkModel::new(config, channels)?;
    let grid: Vec<SlotWeights> = time_grid(config.solver.k_max)?.iter().map(Allocation::slots).collect();
    let solver = &config.solver;

    let mut phase = PhaseVector::ones(model.elements());
    let mut caps = model.capacities(&phase)?;
    let (k0, f0) = argmax_slots(&grid, |s| end_to_end_objective(&caps, s));
    let mut slots = grid[k0];
    let mut f_prev = f0;
    let mut trace = vec![f0];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..solver.t_max {
        iterations += 1;
        let bf = model.beamformers(&phase)?;
        let mu = model.aux_weights(&phase, &bf)?;
        let base = model.weighted_forms(&bf, &mu, [1.0; 4])?;

        let mut best: Option<(PhaseVector, SlotWeights, f64)> = None;
        for &s in &grid {
            let forms = scale_forms(&base, s.term_weights());
            let solved = solve_maxmin_phase(&forms, &phase, &solver.phase)?;
            let f = end_to_end_objective(&model.capacities(&solved.phase)?, s);
            if best.as_ref().map_or(true, |b| f > b.2) {
                best = Some((solved.phase, s, f));
            }
        }
        let (relaxed, s_best, f_relaxed) = best.expect("non-empty grid");

        let (next, rounded_value) = round_feasible(&relaxed, f_prev, |p| {
            Ok(end_to_end_objective(&model.capacities(p)?, s_best))
        })?;
        phase = next;
        slots = s_best;
        caps = model.capacities(&phase)?;
        let f_t = rounded_value.unwrap_or(f_relaxed);
        trace.push(f_t);
        let done = stop(f_t, f_prev, solver.ero);
        f_prev = f_t;
        if done {
            converged = true;
            break;
        }
    }

    Ok(Solution {
        objective: end_to_end_objective(&caps, slots),
        rates: p1_rate_assignment(&caps),
        phase,
        slots,
        capacities: caps,
        trace,
        iterations,
        converged,
    })
}

/// Alternating optimization with the delay constraints.
pub fn optimize_p2(config: &SystemConfig, channels: &ChannelSet) -> Result<Solution> {
    let model = LinkModel::new(config, channels)?;
    let grid: Vec<SlotWeights> = time_grid(config.solver.k_max)?.iter().map(Allocation::slots).collect();
    optimize_delay_constrained(&model, config, &grid)
}

/// The delay-constrained loop over an arbitrary slot grid and downlink source.
///
/// Each iteration picks the slot split maximizing the LP value at the current
/// capacities, refreshes receivers and weights once, and updates the phase.
pub fn optimize_delay_constrained(model: &LinkModel<'_>, config: &SystemConfig, grid: &[SlotWeights]) -> Result<Solution> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty slot grid".into()));
    }
    let solver = &config.solver;
    let mut phase = PhaseVector::ones(model.elements());
    let mut caps = model.capacities(&phase)?;
    let (k0, f0) = argmax_slots(grid, |s| rate_lp_value(&caps, s));
    let mut slots = grid[k0];
    let mut f_prev = f0;
    let mut trace = vec![f0];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..solver.t_max {
        iterations += 1;
        let (k, f_start) = argmax_slots(grid, |s| rate_lp_value(&caps, s));
        slots = grid[k];

        let bf = model.beamformers(&phase)?;
        let mu = model.aux_weights(&phase, &bf)?;
        let forms = model.weighted_forms(&bf, &mu, slots.delay_aware_weights())?;
        let solved = solve_maxmin_phase(&forms, &phase, &solver.phase)?;
        let (next, _) = round_feasible(&solved.phase, f_start, |p| Ok(rate_lp_value(&model.capacities(p)?, slots)))?;
        phase = next;
        caps = model.capacities(&phase)?;
        let f_t = rate_lp_value(&caps, slots);
        trace.push(f_t);
        let done = stop(f_t, f_prev, solver.ero);
        f_prev = f_t;
        if done {
            converged = true;
            break;
        }
    }

    let rates = solve_rate_lp(&caps, slots);
    Ok(Solution {
        objective: end_to_end_objective(&rates, slots),
        rates,
        phase,
        slots,
        capacities: caps,
        trace,
        iterations,
        converged,
    })
}
