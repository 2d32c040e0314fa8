//! Offloading task model, rank-1 line-of-sight channel responses and the
//! single-link power baseline.
//!
//! Rates are spectral efficiencies in bit/s/Hz everywhere; the bandwidth only
//! enters through the bit time `1/B` when the minimum rate is derived from a
//! latency budget. Conversions from dB/dBm happen in the constructors, so all
//! arithmetic downstream is linear.

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Converts a power level in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

/// Latency and computation parameters of one offloaded application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadTask {
    /// Information bits uploaded to the edge host.
    pub bits: u64,
    /// CPU cycles needed to execute the application.
    pub cycles: f64,
    /// Edge host speed in cycles/s.
    pub server_speed: f64,
    /// Time to return the result to the device, in s.
    pub downlink_time: f64,
    /// End-to-end latency budget, in s.
    pub latency: f64,
    /// Uplink bandwidth in Hz.
    pub bandwidth: f64,
}

impl OffloadTask {
    pub fn new(
        bits: u64,
        cycles: f64,
        server_speed: f64,
        downlink_time: f64,
        latency: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        if bits == 0 {
            return Err(OffloadError::InvalidParameter("bit count must be at least 1".into()));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(OffloadError::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(server_speed > 0.0) {
            return Err(OffloadError::InvalidParameter(format!(
                "server speed must be positive, got {server_speed}"
            )));
        }
        if !(cycles >= 0.0) || !(downlink_time >= 0.0) {
            return Err(OffloadError::InvalidParameter(
                "cycles and downlink time must be non-negative".into(),
            ));
        }
        if !(latency > 0.0) {
            return Err(OffloadError::InvalidParameter(format!("latency must be positive, got {latency}")));
        }
        Ok(Self { bits, cycles, server_speed, downlink_time, latency, bandwidth })
    }

    pub fn bit_time(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// Execution plus downlink time: the part of the budget not available to the uplink.
    pub fn busy_time(&self) -> f64 {
        self.cycles / self.server_speed + self.downlink_time
    }

    /// Minimum uplink spectral efficiency that meets the latency budget.
    pub fn r_min(&self) -> Result<f64> {
        r_min(self)
    }
}

/// Minimum spectral efficiency `n_b T_b / (L - w/f_S - D_rx)`.
pub fn r_min(task: &OffloadTask) -> Result<f64> {
    let busy = task.busy_time();
    let window = task.latency - busy;
    if !(window > 0.0) {
        return Err(OffloadError::LatencyInfeasible { latency: task.latency, busy });
    }
    Ok(task.bits as f64 * task.bit_time() / window)
}

/// Free-space path-loss constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriisParams {
    pub rx_gain: f64,
    pub tx_gain: f64,
    /// Wavelength in m.
    pub wavelength: f64,
    /// Noise power in W.
    pub noise_power: f64,
    pub path_loss_exponent: f64,
    /// Propagation constant `G_R G_T (lambda / 4 pi)^2` for free space.
    pub b: f64,
}

impl FriisParams {
    /// Free-space constants (`alpha = 2`), noise power given in dBm.
    pub fn free_space(rx_gain: f64, tx_gain: f64, wavelength: f64, noise_dbm: f64) -> Result<Self> {
        for (name, v) in [("rx_gain", rx_gain), ("tx_gain", tx_gain), ("wavelength", wavelength)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(OffloadError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let noise_power = dbm_to_watts(noise_dbm);
        let b = rx_gain * tx_gain * (wavelength / (4.0 * std::f64::consts::PI)).powi(2);
        Ok(Self { rx_gain, tx_gain, wavelength, noise_power, path_loss_exponent: 2.0, b })
    }

    /// Arbitrary path-loss exponent with an explicitly supplied constant `b`.
    ///
    /// The antenna fields are left at 1 and the wavelength at 0, since they
    /// do not determine `b` outside free space.
    pub fn with_constant(b: f64, noise_power: f64, path_loss_exponent: f64) -> Result<Self> {
        for (name, v) in [("b", b), ("noise_power", noise_power), ("path_loss_exponent", path_loss_exponent)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(OffloadError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { rx_gain: 1.0, tx_gain: 1.0, wavelength: 0.0, noise_power, path_loss_exponent, b })
    }

    /// The 5G mmWave constants used throughout the experiments:
    /// 128 x 32 antennas, 5 mm wavelength, -82.96 dBm noise.
    pub fn mmwave_default() -> Self {
        Self::free_space(128.0, 32.0, 0.005, -82.96).expect("constants are valid")
    }

    pub fn gain(&self, distance: f64) -> Result<f64> {
        gain_from_distance(self, distance)
    }
}

/// Channel response `b / (sigma^2 d^alpha)` of a line-of-sight link at distance `d`.
pub fn gain_from_distance(params: &FriisParams, distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(OffloadError::InvalidDistance(distance));
    }
    Ok(params.b / (params.noise_power * distance.powf(params.path_loss_exponent)))
}

/// Per-link channel responses sorted from best to worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    gains: Vec<f64>,
    distances: Option<Vec<f64>>,
}

impl ChannelSet {
    /// Wraps gains that are already sorted in non-increasing order.
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(OffloadError::InvalidParameter("a channel set needs at least one link".into()));
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(OffloadError::InvalidParameter(format!("channel gains must be positive and finite, got {g}")));
        }
        if gains.windows(2).any(|w| w[0] < w[1]) {
            return Err(OffloadError::InvalidParameter("channel gains must be non-increasing".into()));
        }
        Ok(Self { gains, distances: None })
    }

    /// Sorts arbitrary positive gains best-first.
    pub fn from_unsorted(mut gains: Vec<f64>) -> Result<Self> {
        gains.sort_by(|a, b| b.total_cmp(a));
        Self::new(gains)
    }

    /// Derives gains from UE-AP distances; distances are sorted ascending first.
    pub fn from_distances(params: &FriisParams, mut distances: Vec<f64>) -> Result<Self> {
        distances.sort_by(f64::total_cmp);
        let gains = distances
            .iter()
            .map(|&d| gain_from_distance(params, d))
            .collect::<Result<Vec<_>>>()?;
        let mut set = Self::new(gains)?;
        set.distances = Some(distances);
        Ok(set)
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn distances(&self) -> Option<&[f64]> {
        self.distances.as_deref()
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// The best `n` links.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.clamp(1, self.len());
        Self {
            gains: self.gains[..n].to_vec(),
            distances: self.distances.as_ref().map(|d| d[..n].to_vec()),
        }
    }

    /// Multiplies every gain by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut set = Self::new(self.gains.iter().map(|g| g * factor).collect())?;
        set.distances = None;
        Ok(set)
    }
}

/// Power `(2^R - 1)/a` that makes a single link carry rate `R`.
pub fn single_link_min_power(gain: f64, rate: f64) -> f64 {
    exp2_m1(rate) / gain
}

/// Whether a power level respects a budget; the bound is inclusive.
pub fn check_budget(power: f64, budget: f64) -> bool {
    power <= budget
}

/// `2^x - 1` without cancellation near zero.
pub(crate) fn exp2_m1(x: f64) -> f64 {
    (x * std::f64::consts::LN_2).exp_m1()
}
