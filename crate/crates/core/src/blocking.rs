//! Line-of-sight probabilities under randomly placed rectangular blockers.
//!
//! Blocker centres form a PPP of intensity `mu`; widths and lengths enter only
//! through their means. A link of length `d` is clear with probability
//! `exp(-beta d - q)`. Blocking on distinct links is treated as independent.

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};
use crate::geometry::{Deployment, PER_KM2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageEnv {
    mu: f64,
    mean_w: f64,
    mean_x: f64,
}

impl BlockageEnv {
    /// `mu` in blockers/m^2, sizes in m.
    pub fn new(mu: f64, mean_w: f64, mean_x: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(OffloadError::InvalidParameter(format!("blocker density must be >= 0, got {mu}")));
        }
        if !(mean_w > 0.0 && mean_x > 0.0 && mean_w.is_finite() && mean_x.is_finite()) {
            return Err(OffloadError::InvalidParameter("mean blocker sizes must be positive".into()));
        }
        Ok(Self { mu, mean_w, mean_x })
    }

    pub fn per_km2(mu_km2: f64, mean_w: f64, mean_x: f64) -> Result<Self> {
        Self::new(mu_km2 * PER_KM2, mean_w, mean_x)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mean_w(&self) -> f64 {
        self.mean_w
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_x
    }

    /// Blockage rate per metre of link length.
    pub fn beta(&self) -> f64 {
        2.0 * self.mu * (self.mean_w + self.mean_x) / std::f64::consts::PI
    }

    /// Probability mass of a blocker covering the endpoint itself.
    pub fn q(&self) -> f64 {
        self.mu * self.mean_w * self.mean_x
    }
}

/// Probability that a link of length `d` metres is not obstructed.
pub fn p_on(env: &BlockageEnv, d: f64) -> f64 {
    (-env.beta() * d - env.q()).exp()
}

/// Blocking probabilities of the `n_links` nearest APs, ascending.
pub fn link_blocking_probs(env: &BlockageEnv, dep: &Deployment, n_links: usize) -> Result<Vec<f64>> {
    if dep.is_empty() {
        return Err(OffloadError::EmptyDeployment);
    }
    if n_links > dep.len() {
        return Err(OffloadError::InvalidParameter(format!(
            "requested {n_links} links from {} APs",
            dep.len()
        )));
    }
    Ok(blocking_probs_from_distances(env, &dep.sorted_distances()[..n_links]))
}

/// `1 - p_on` for each distance; ascending distances give ascending output.
pub fn blocking_probs_from_distances(env: &BlockageEnv, distances: &[f64]) -> Vec<f64> {
    distances.iter().map(|d| -(-env.beta() * d - env.q()).exp_m1()).collect()
}
