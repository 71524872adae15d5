//! Cascade channels, MMSE receivers and the WMMSE rate surrogate.
//!
//! For a fixed receiver w and weight μ the surrogate
//! `B/ln2 · (ln μ − μ·e(φ) + 1)` is a concave quadratic in the RIS phase
//! vector φ. [`LinkModel::quad_forms`] returns its coefficients for the four
//! slot-weighted throughput terms, which is what the phase solver maximizes.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::alloc::SlotWeights;
use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};

const MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Device {
    D1,
    D2,
}

impl Device {
    pub const ALL: [Device; 2] = [Device::D1, Device::D2];

    pub fn index(self) -> usize {
        match self {
            Device::D1 => 0,
            Device::D2 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// Device → RIS → AP, decoded at the medium-matched AP.
    Up(Device),
    /// RIS-borne downlink read back by the device.
    Down(Device),
}

/// Identifies one of the four throughput terms, in capacity-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermLabel {
    Up1,
    Up2,
    Down1,
    Down2,
}

impl TermLabel {
    pub const ALL: [TermLabel; 4] = [TermLabel::Up1, TermLabel::Up2, TermLabel::Down1, TermLabel::Down2];

    pub fn link(self) -> Link {
        match self {
            TermLabel::Up1 => Link::Up(Device::D1),
            TermLabel::Up2 => Link::Up(Device::D2),
            TermLabel::Down1 => Link::Down(Device::D1),
            TermLabel::Down2 => Link::Down(Device::D2),
        }
    }
}

/// Four per-link values in the order (1U, 2U, 1D, 2D). Used for capacities and rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkRates {
    pub up: [f64; 2],
    pub down: [f64; 2],
}

pub type Capacities = LinkRates;

impl LinkRates {
    pub fn new(up1: f64, up2: f64, down1: f64, down2: f64) -> Self {
        LinkRates {
            up: [up1, up2],
            down: [down1, down2],
        }
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.up[0], self.up[1], self.down[0], self.down[1]]
    }

    pub fn get(&self, link: Link) -> f64 {
        match link {
            Link::Up(d) => self.up[d.index()],
            Link::Down(d) => self.down[d.index()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// |φ_n| ≤ 1.
    Relaxed,
    /// |φ_n| = 1.
    Feasible,
}

/// RIS reflection coefficients φ (the channel-gain part of the phase only).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    entries: DVector<Complex64>,
    mode: PhaseMode,
}

impl PhaseVector {
    pub fn relaxed(entries: DVector<Complex64>) -> Result<Self> {
        if let Some((n, z)) = entries.iter().enumerate().find(|(_, z)| !(z.norm() <= 1.0 + MODULUS_TOL)) {
            return Err(Error::InvalidInput(format!("phase entry {n} has modulus {} > 1", z.norm())));
        }
        Ok(PhaseVector {
            entries,
            mode: PhaseMode::Relaxed,
        })
    }

    pub fn feasible(entries: DVector<Complex64>) -> Result<Self> {
        if let Some((n, z)) = entries
            .iter()
            .enumerate()
            .find(|(_, z)| !((z.norm() - 1.0).abs() <= MODULUS_TOL))
        {
            return Err(Error::InvalidInput(format!("phase entry {n} has modulus {} != 1", z.norm())));
        }
        Ok(PhaseVector {
            entries,
            mode: PhaseMode::Feasible,
        })
    }

    /// All-ones start vector φ_0.
    pub fn ones(n: usize) -> Self {
        PhaseVector {
            entries: DVector::from_element(n, Complex64::new(1.0, 0.0)),
            mode: PhaseMode::Feasible,
        }
    }

    pub fn zeros(n: usize) -> Self {
        PhaseVector {
            entries: DVector::zeros(n),
            mode: PhaseMode::Relaxed,
        }
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        PhaseVector {
            entries: DVector::from_iterator(angles.len(), angles.iter().map(|&a| Complex64::from_polar(1.0, a))),
            mode: PhaseMode::Feasible,
        }
    }

    pub fn entries(&self) -> &DVector<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DVector<Complex64> {
        self.entries
    }

    pub fn mode(&self) -> PhaseMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_unit_modulus(&self) -> bool {
        self.entries.iter().all(|z| (z.norm() - 1.0).abs() <= MODULUS_TOL)
    }

    /// e^{j·arg φ_n} entrywise; zero entries map to 1.
    pub fn to_unit_modulus(&self) -> PhaseVector {
        let entries = self.entries.map(|z| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        PhaseVector {
            entries,
            mode: PhaseMode::Feasible,
        }
    }
}

/// MMSE receivers for the two uplinks and two downlinks.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub up: [DVector<Complex64>; 2],
    pub down: [Complex64; 2],
}

/// WMMSE weights μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxWeights {
    pub up: [f64; 2],
    pub down: [f64; 2],
}

/// f(φ) = 2·Re{Aφ} − φᴴBφ + C.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    /// Row vector A, stored as a column.
    pub a: DVector<Complex64>,
    pub b: DMatrix<Complex64>,
    pub c: f64,
    pub label: TermLabel,
}

impl QuadForm {
    pub fn new(a: DVector<Complex64>, b: DMatrix<Complex64>, c: f64, label: TermLabel) -> Result<Self> {
        let n = a.len();
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::Dimension(format!(
                "quadratic form: A has {n} entries but B is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(QuadForm { a, b, c, label })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn value(&self, phi: &DVector<Complex64>) -> f64 {
        let bphi = &self.b * phi;
        self.value_with(phi, &bphi)
    }

    /// Value given a precomputed Bφ.
    pub fn value_with(&self, phi: &DVector<Complex64>, bphi: &DVector<Complex64>) -> f64 {
        let lin: Complex64 = self.a.iter().zip(phi.iter()).map(|(a, p)| a * p).sum();
        let quad: Complex64 = phi.iter().zip(bphi.iter()).map(|(p, q)| p.conj() * q).sum();
        2.0 * lin.re - quad.re + self.c
    }

    /// Gradient with respect to the conjugate coordinates φ*: Aᴴ − Bφ.
    pub fn gradient(&self, phi: &DVector<Complex64>) -> DVector<Complex64> {
        self.a.map(|a| a.conj()) - &self.b * phi
    }

    pub fn scaled(&self, s: f64) -> QuadForm {
        QuadForm {
            a: &self.a * Complex64::new(s, 0.0),
            b: &self.b * Complex64::new(s, 0.0),
            c: self.c * s,
            label: self.label,
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let n = self.len();
        (0..n).all(|i| (i..n).all(|j| (self.b[(i, j)] - self.b[(j, i)].conj()).norm() <= tol * scale))
    }

    /// Fails unless B is Hermitian positive semidefinite (up to a relative 1e-10 shift).
    pub fn check_psd(&self) -> Result<()> {
        if !self.is_hermitian(1e-10) {
            return Err(Error::InvalidInput(format!("{:?}: B is not Hermitian", self.label)));
        }
        let n = self.len();
        let trace: f64 = (0..n).map(|i| self.b[(i, i)].re).sum();
        if trace < 0.0 {
            return Err(Error::InvalidInput(format!("{:?}: B has negative trace", self.label)));
        }
        let shift = 1e-10 * trace.max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE;
        let mut shifted = self.b.clone();
        for i in 0..n {
            shifted[(i, i)] += Complex64::new(shift, 0.0);
        }
        // Symmetrize so the factorization sees an exactly Hermitian matrix.
        let herm = (&shifted + shifted.adjoint()) * Complex64::new(0.5, 0.0);
        if herm.cholesky().is_none() {
            return Err(Error::InvalidInput(format!("{:?}: B is not positive semidefinite", self.label)));
        }
        Ok(())
    }

    /// Upper bound on the largest eigenvalue of a PSD B.
    pub fn curvature_bound(&self) -> f64 {
        (0..self.len()).map(|i| self.b[(i, i)].re).sum::<f64>().max(0.0)
    }
}

/// Shannon capacity B·log2(1+γ) in bit/s.
pub fn capacity(bandwidth: f64, gamma: f64) -> f64 {
    bandwidth * gamma.ln_1p() / LN_2
}

/// μ = 1/e, the maximizer of the surrogate for a given MSE.
pub fn optimal_weight(e: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("MSE must be positive, got {e}")));
    }
    Ok(1.0 / e)
}

/// B·(log2 μ − (μe − 1)/ln 2). Equals the capacity at μ = 1/e_MMSE.
pub fn surrogate_rate(bandwidth: f64, mu: f64, e: f64) -> f64 {
    bandwidth * (mu.log2() - (mu * e - 1.0) / LN_2)
}

/// Column MMSE vector (h̄h̄ᴴ + σ²I)⁻¹h̄.
pub fn mmse_uplink(hbar: &DVector<Complex64>, noise_var: f64) -> DVector<Complex64> {
    let m = hbar.len();
    let mut r = hbar * hbar.adjoint();
    for i in 0..m {
        r[(i, i)] += Complex64::new(noise_var, 0.0);
    }
    r.lu().solve(hbar).unwrap_or_else(|| DVector::zeros(m))
}

/// Scalar MMSE receiver h̄ / (|h̄|² + SI + σ̃²).
pub fn mmse_downlink(hbar: Complex64, noise_var: f64, si_power: f64) -> Complex64 {
    hbar / (hbar.norm_sqr() + si_power + noise_var)
}

/// |wᴴh̄|² / (‖w‖²σ²), zero for a null receiver.
pub fn uplink_sinr_with(w: &DVector<Complex64>, hbar: &DVector<Complex64>, noise_var: f64) -> f64 {
    let wn = w.norm_squared();
    if wn == 0.0 {
        return 0.0;
    }
    w.dotc(hbar).norm_sqr() / (wn * noise_var)
}

/// Which node transmits the downlink carrier that the RIS modulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownlinkSource {
    /// The device's own carrier, reflected back by the RIS (proposed scheme).
    Ris,
    /// AP_i transmits through the RIS (AP-based benchmark).
    Ap,
}

/// Link-level quantities of one channel realization.
#[derive(Debug, Clone)]
pub struct LinkModel<'a> {
    channels: &'a ChannelSet,
    power: [f64; 2],
    ap_power: [f64; 2],
    bandwidth: [f64; 2],
    rho_si: f64,
    source: DownlinkSource,
}

impl<'a> LinkModel<'a> {
    pub fn new(config: &SystemConfig, channels: &'a ChannelSet) -> Result<Self> {
        let mut model = Self::from_parts(channels, config.derived_powers().tx, config.bandwidths(), config.rho_si)?;
        model.ap_power = config.ap_powers();
        Ok(model)
    }

    pub fn from_parts(channels: &'a ChannelSet, power: [f64; 2], bandwidth: [f64; 2], rho_si: f64) -> Result<Self> {
        channels.validate()?;
        Ok(LinkModel {
            channels,
            power,
            ap_power: power,
            bandwidth,
            rho_si,
            source: DownlinkSource::Ris,
        })
    }

    pub fn with_downlink_source(mut self, source: DownlinkSource) -> Self {
        self.source = source;
        self
    }

    pub fn with_ap_power(mut self, ap_power: [f64; 2]) -> Self {
        self.ap_power = ap_power;
        self
    }

    pub fn channels(&self) -> &ChannelSet {
        self.channels
    }

    pub fn elements(&self) -> usize {
        self.channels.elements()
    }

    pub fn power(&self) -> [f64; 2] {
        self.power
    }

    pub fn bandwidth(&self) -> [f64; 2] {
        self.bandwidth
    }

    pub fn rho_si(&self) -> f64 {
        self.rho_si
    }

    pub fn source(&self) -> DownlinkSource {
        self.source
    }

    fn check(&self, phase: &PhaseVector) -> Result<()> {
        if phase.len() != self.elements() {
            return Err(Error::Dimension(format!(
                "phase vector has {} entries, RIS has {}",
                phase.len(),
                self.elements()
            )));
        }
        Ok(())
    }

    /// Transmit power, RIS→receiver row g and transmitter→RIS column h of a downlink.
    fn downlink_path(&self, dev: Device) -> (f64, &DVector<Complex64>, &DVector<Complex64>) {
        let i = dev.index();
        let ch = &self.channels.devices[i];
        match self.source {
            DownlinkSource::Ris => (self.power[i], &ch.g_ris, &ch.h_ris),
            DownlinkSource::Ap => (self.ap_power[i], &ch.g_ap, &ch.h_ris),
        }
    }

    /// h̄ᵁ = √P·H_{i,0}·diag(φ)·h_{i,r}.
    pub fn cascade_uplink(&self, phase: &PhaseVector, dev: Device) -> Result<DVector<Complex64>> {
        self.check(phase)?;
        Ok(self.cascade_uplink_raw(phase.entries(), dev))
    }

    fn cascade_uplink_raw(&self, phi: &DVector<Complex64>, dev: Device) -> DVector<Complex64> {
        let ch = &self.channels.devices[dev.index()];
        let weighted = ch.h_ris.component_mul(phi);
        (&ch.ris_ap * weighted) * Complex64::new(self.power[dev.index()].sqrt(), 0.0)
    }

    /// h̄ᴰ = √P·g·diag(φ)·h.
    pub fn cascade_downlink(&self, phase: &PhaseVector, dev: Device) -> Result<Complex64> {
        self.check(phase)?;
        Ok(self.cascade_downlink_raw(phase.entries(), dev))
    }

    fn cascade_downlink_raw(&self, phi: &DVector<Complex64>, dev: Device) -> Complex64 {
        let (p, g, h) = self.downlink_path(dev);
        let s: Complex64 = g.iter().zip(phi.iter()).zip(h.iter()).map(|((g, f), h)| g * f * h).sum();
        s * p.sqrt()
    }

    pub fn uplink_receiver(&self, phase: &PhaseVector, dev: Device) -> Result<DVector<Complex64>> {
        let hbar = self.cascade_uplink(phase, dev)?;
        Ok(mmse_uplink(&hbar, self.channels.devices[dev.index()].noise_up))
    }

    pub fn downlink_receiver(&self, phase: &PhaseVector, dev: Device) -> Result<Complex64> {
        let hbar = self.cascade_downlink(phase, dev)?;
        let ch = &self.channels.devices[dev.index()];
        Ok(mmse_downlink(hbar, ch.noise_down, self.rho_si * hbar.norm_sqr()))
    }

    pub fn beamformers(&self, phase: &PhaseVector) -> Result<Beamformers> {
        Ok(Beamformers {
            up: [
                self.uplink_receiver(phase, Device::D1)?,
                self.uplink_receiver(phase, Device::D2)?,
            ],
            down: [
                self.downlink_receiver(phase, Device::D1)?,
                self.downlink_receiver(phase, Device::D2)?,
            ],
        })
    }

    /// SINR with the MMSE receiver.
    pub fn sinr(&self, phase: &PhaseVector, link: Link) -> Result<f64> {
        match link {
            Link::Up(dev) => {
                let hbar = self.cascade_uplink(phase, dev)?;
                let noise = self.channels.devices[dev.index()].noise_up;
                let w = mmse_uplink(&hbar, noise);
                Ok(uplink_sinr_with(&w, &hbar, noise))
            }
            Link::Down(dev) => {
                let s = self.cascade_downlink(phase, dev)?.norm_sqr();
                let noise = self.channels.devices[dev.index()].noise_down;
                Ok(s / (self.rho_si * s + noise))
            }
        }
    }

    pub fn link_capacity(&self, phase: &PhaseVector, link: Link) -> Result<f64> {
        let b = match link {
            Link::Up(d) | Link::Down(d) => self.bandwidth[d.index()],
        };
        Ok(capacity(b, self.sinr(phase, link)?))
    }

    pub fn capacities(&self, phase: &PhaseVector) -> Result<Capacities> {
        let mut out = [0.0; 4];
        for (slot, label) in out.iter_mut().zip(TermLabel::ALL) {
            *slot = self.link_capacity(phase, label.link())?;
        }
        Ok(LinkRates::from_array(out))
    }

    /// (wᴴh̄ − 1)(wᴴh̄ − 1)ᴴ + ‖w‖²σ0².
    pub fn mse_uplink(&self, phase: &PhaseVector, dev: Device, w: &DVector<Complex64>) -> Result<f64> {
        let hbar = self.cascade_uplink(phase, dev)?;
        if w.len() != hbar.len() {
            return Err(Error::Dimension(format!("receiver has {} taps, AP has {}", w.len(), hbar.len())));
        }
        let noise = self.channels.devices[dev.index()].noise_up;
        Ok((w.dotc(&hbar) - 1.0).norm_sqr() + w.norm_squared() * noise)
    }

    /// Downlink MSE; residual SI of power ρ_SI·|h̄|² is treated as extra noise.
    pub fn mse_downlink(&self, phase: &PhaseVector, dev: Device, w: Complex64) -> Result<f64> {
        let hbar = self.cascade_downlink(phase, dev)?;
        let noise = self.channels.devices[dev.index()].noise_down;
        let interference = self.rho_si * hbar.norm_sqr();
        Ok((w.conj() * hbar - 1.0).norm_sqr() + w.norm_sqr() * (noise + interference))
    }

    pub fn mses(&self, phase: &PhaseVector, bf: &Beamformers) -> Result<[f64; 4]> {
        Ok([
            self.mse_uplink(phase, Device::D1, &bf.up[0])?,
            self.mse_uplink(phase, Device::D2, &bf.up[1])?,
            self.mse_downlink(phase, Device::D1, bf.down[0])?,
            self.mse_downlink(phase, Device::D2, bf.down[1])?,
        ])
    }

    pub fn aux_weights(&self, phase: &PhaseVector, bf: &Beamformers) -> Result<AuxWeights> {
        let e = self.mses(phase, bf)?;
        Ok(AuxWeights {
            up: [optimal_weight(e[0])?, optimal_weight(e[1])?],
            down: [optimal_weight(e[2])?, optimal_weight(e[3])?],
        })
    }

    /// Surrogate rates B·(log2 μ − (μe−1)/ln2) of the four links at φ.
    pub fn surrogate_rates(&self, phase: &PhaseVector, bf: &Beamformers, weights: &AuxWeights) -> Result<LinkRates> {
        let e = self.mses(phase, bf)?;
        let [b1, b2] = self.bandwidth;
        Ok(LinkRates::new(
            surrogate_rate(b1, weights.up[0], e[0]),
            surrogate_rate(b2, weights.up[1], e[1]),
            surrogate_rate(b1, weights.down[0], e[2]),
            surrogate_rate(b2, weights.down[1], e[3]),
        ))
    }

    /// The four surrogate terms, each multiplied by its entry of `term_weights`
    /// (order 1U, 2U, 1D, 2D).
    pub fn weighted_forms(&self, bf: &Beamformers, weights: &AuxWeights, term_weights: [f64; 4]) -> Result<[QuadForm; 4]> {
        let n = self.elements();
        for (i, w) in bf.up.iter().enumerate() {
            if w.len() != self.channels.antennas() {
                return Err(Error::Dimension(format!(
                    "uplink receiver {} has {} taps, AP has {}",
                    i + 1,
                    w.len(),
                    self.channels.antennas()
                )));
            }
        }
        let mut forms = Vec::with_capacity(4);
        for (label, tw) in TermLabel::ALL.into_iter().zip(term_weights) {
            let (dev, up) = match label.link() {
                Link::Up(d) => (d, true),
                Link::Down(d) => (d, false),
            };
            let i = dev.index();
            let ch = &self.channels.devices[i];
            let kappa = tw * self.bandwidth[i] / LN_2;
            // e(φ) = q·|uᴴφ|² − 2Re{r·uᴴφ} + e0, with u chosen per link.
            let (mu, u, q, r, e0) = if up {
                let w = &bf.up[i];
                let p = self.power[i];
                // u_n = conj(h_n)·(H[:,n]ᴴ w), so wᴴH diag(φ) h = uᴴφ.
                let hw = ch.ris_ap.adjoint() * w;
                let u = DVector::from_fn(n, |k, _| ch.h_ris[k].conj() * hw[k]);
                (weights.up[i], u, p, Complex64::new(p.sqrt(), 0.0), 1.0 + w.norm_squared() * ch.noise_up)
            } else {
                let w = bf.down[i];
                let (p, g, h) = self.downlink_path(dev);
                // u_n = conj(g_n h_n), so g diag(φ) h = uᴴφ.
                let u = DVector::from_fn(n, |k, _| (g[k] * h[k]).conj());
                let q = p * w.norm_sqr() * (1.0 + self.rho_si);
                (weights.down[i], u, q, w.conj() * p.sqrt(), 1.0 + w.norm_sqr() * ch.noise_down)
            };
            let a = u.map(|z| z.conj() * r * (kappa * mu));
            let b = (&u * u.adjoint()) * Complex64::new(kappa * mu * q, 0.0);
            let c = kappa * (mu.ln() + 1.0 - mu * e0);
            forms.push(QuadForm::new(a, b, c, label)?);
        }
        Ok(forms.try_into().expect("four forms"))
    }

    /// Forms of the relaxed max-min problem for a slot split: f1U·T2, f2U·T1, f1D·T1, f2D·T2.
    pub fn quad_forms(&self, bf: &Beamformers, weights: &AuxWeights, slots: SlotWeights) -> Result<[QuadForm; 4]> {
        self.weighted_forms(bf, weights, slots.term_weights())
    }
}
