//! Geometry-driven channel generation.
//!
//! Every hop is a log-distance pathloss times a Rician small-scale sample.
//! The total antenna gain G_i of a medium is split evenly across the two
//! hops of a cascade, so the device→RIS→receiver product carries G_i once.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::config::{db_to_linear, LosPhase, Medium, SystemConfig};
use crate::error::{Error, Result};

/// Log-distance pathloss of one link in dB, including the full antenna gain G_i.
pub fn large_scale_gain_db(dist: f64, medium: &Medium, config: &SystemConfig) -> Result<f64> {
    let d0 = config.ref_distance_m;
    if !(d0 > 0.0) || !(dist >= d0) {
        return Err(Error::Domain(format!(
            "distance {dist} m is below the reference distance {d0} m"
        )));
    }
    let lambda = medium.wavelength();
    Ok(-20.0 * (4.0 * std::f64::consts::PI * d0 / lambda).log10()
        - 10.0 * config.pathloss_exponent * (dist / d0).log10()
        + medium.antenna_gain_db)
}

/// Linear power gain of a single hop of a cascade (half of G_i in dB).
pub fn hop_gain(dist: f64, medium: &Medium, config: &SystemConfig) -> Result<f64> {
    let db = large_scale_gain_db(dist, medium, config)? - medium.antenna_gain_db / 2.0;
    Ok(db_to_linear(db))
}

/// One Rician small-scale coefficient: √(K/(K+1))·e^{jθ} + √(1/(K+1))·β with β ~ Exp(1).
pub fn small_scale_sample<R: Rng + ?Sized>(medium: &Medium, dist: f64, rng: &mut R) -> Complex64 {
    let k = medium.rician_k_linear();
    let theta = match medium.los_phase {
        LosPhase::Gaussian => rng.sample::<f64, _>(StandardNormal),
        LosPhase::Propagation => 2.0 * std::f64::consts::PI * dist / medium.wavelength(),
    };
    let beta: f64 = rng.sample(Exp1);
    let (los, nlos) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    Complex64::from_polar(los, theta) + nlos * beta
}

/// Channels and noise powers seen by one device and its medium-matched AP.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceChannels {
    /// h_{i,r}: device → RIS, length N.
    pub h_ris: DVector<Complex64>,
    /// H_{i,0}: RIS → AP_i, M×N.
    pub ris_ap: DMatrix<Complex64>,
    /// g_{i,r}: RIS → device, length N (row vector in the signal model).
    pub g_ris: DVector<Complex64>,
    /// g_{AP_i,r}: AP_i ↔ RIS, length N. Only the AP-based benchmark uses it.
    pub g_ap: DVector<Complex64>,
    /// h_ii: loop channel between the device's own antennas.
    pub h_loop: Complex64,
    /// σ0² at the AP.
    pub noise_up: f64,
    /// σ̃_i² at the device (LI plus noise).
    pub noise_down: f64,
    /// Linear large-scale gain of the device–RIS hop.
    pub gain_device_ris: f64,
    /// Linear large-scale gain of the RIS–AP hop.
    pub gain_ris_ap: f64,
}

impl DeviceChannels {
    /// Cascade pathloss variance of the uplink (device → RIS → AP).
    pub fn alpha_up(&self) -> f64 {
        self.gain_device_ris * self.gain_ris_ap
    }

    /// Cascade pathloss variance of the downlink (device → RIS → device).
    pub fn alpha_down(&self) -> f64 {
        self.gain_device_ris * self.gain_device_ris
    }

    fn is_finite(&self) -> bool {
        let fin = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        self.h_ris.iter().all(fin)
            && self.ris_ap.iter().all(fin)
            && self.g_ris.iter().all(fin)
            && self.g_ap.iter().all(fin)
            && fin(&self.h_loop)
    }
}

/// One realization of every channel in the scenario, indexed by device (0 → D1, 1 → D2).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub devices: [DeviceChannels; 2],
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.devices[0].h_ris.len()
    }

    pub fn antennas(&self) -> usize {
        self.devices[0].ris_ap.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.elements();
        let m = self.antennas();
        for (i, d) in self.devices.iter().enumerate() {
            if d.h_ris.len() != n
                || d.g_ris.len() != n
                || d.g_ap.len() != n
                || d.ris_ap.ncols() != n
                || d.ris_ap.nrows() != m
            {
                return Err(Error::Dimension(format!(
                    "device {} channels do not match N={n}, M={m}",
                    i + 1
                )));
            }
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!("device {} has non-finite channel entries", i + 1)));
            }
            if !(d.noise_up > 0.0 && d.noise_down > 0.0) {
                return Err(Error::InvalidInput(format!("device {} noise variances must be positive", i + 1)));
            }
        }
        Ok(())
    }
}

/// Draws a full channel realization. The draw order is fixed so a seeded RNG
/// reproduces the set bit for bit.
pub fn draw_channel_set<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<ChannelSet> {
    let n = config.ris_elements;
    let m = config.ap_antennas;
    let powers = config.derived_powers();
    let mut draw_device = |i: usize| -> Result<DeviceChannels> {
        let medium = &config.media[i];
        let d_dr = config.geometry.device_ris(i);
        let d_ra = config.geometry.ris_ap(i);
        let gain_dr = hop_gain(d_dr, medium, config)?;
        let gain_ra = hop_gain(d_ra, medium, config)?;
        let (amp_dr, amp_ra) = (gain_dr.sqrt(), gain_ra.sqrt());

        let h_ris = DVector::from_fn(n, |_, _| amp_dr * small_scale_sample(medium, d_dr, rng));
        // Column-major fill: all antennas of element 0, then element 1, ...
        let ris_ap = DMatrix::from_fn(m, n, |_, _| amp_ra * small_scale_sample(medium, d_ra, rng));
        let g_ris = DVector::from_fn(n, |_, _| amp_dr * small_scale_sample(medium, d_dr, rng));
        let g_ap = DVector::from_fn(n, |_, _| amp_ra * small_scale_sample(medium, d_ra, rng));
        let h_loop = small_scale_sample(medium, config.ref_distance_m, rng);

        Ok(DeviceChannels {
            h_ris,
            ris_ap,
            g_ris,
            g_ap,
            h_loop,
            noise_up: powers.noise[i],
            noise_down: config.li_noise_ratio * powers.noise[i],
            gain_device_ris: gain_dr,
            gain_ris_ap: gain_ra,
        })
    };
    let d1 = draw_device(0)?;
    let d2 = draw_device(1)?;
    Ok(ChannelSet { devices: [d1, d2] })
}

/// Effective noise variances after accounting for channel estimation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseInflation {
    pub up: [f64; 2],
    pub down: [f64; 2],
}

/// Treats the drawn channels as ML estimates and folds the estimation error
/// into the receiver noise: ρ_e²·P_i·α is added per link, and the downlink
/// additionally picks up the residual-SI share ρ_e²·ρ_SI·P_i·α^D.
pub fn apply_estimation_error(
    channels: &ChannelSet,
    rho_e: f64,
    config: &SystemConfig,
) -> Result<(ChannelSet, NoiseInflation)> {
    if !(rho_e >= 0.0 && rho_e.is_finite()) {
        return Err(Error::Domain(format!("estimation error coefficient must be >= 0, got {rho_e}")));
    }
    let powers = config.derived_powers();
    let mut out = channels.clone();
    let r2 = rho_e * rho_e;
    for (i, d) in out.devices.iter_mut().enumerate() {
        let p = powers.tx[i];
        d.noise_up += r2 * p * d.alpha_up();
        d.noise_down += r2 * p * d.alpha_down() * (1.0 + config.rho_si);
    }
    let inflation = NoiseInflation {
        up: [out.devices[0].noise_up, out.devices[1].noise_up],
        down: [out.devices[0].noise_down, out.devices[1].noise_down],
    };
    Ok((out, inflation))
}
