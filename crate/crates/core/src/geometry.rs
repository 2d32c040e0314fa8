//! Stochastic geometry of access-point deployments around a user at the origin.
//!
//! Access points form a homogeneous Poisson point process. With gains
//! proportional to `d^-alpha`, using `N` links pays off iff
//! `d_N^{N-1} < d_1 ... d_{N-1} A` with `A = 2^{R_min/alpha}`; these events are
//! nested, so `N*` is the length of the leading run of true events.
//! `N* - 1` is (conjecturally, exactly for `N* <= 2`) Poisson with mean
//! `ln A^2`, independent of the intensity.
//!
//! Intensities are stored in points/m^2. Helpers taking or returning
//! points/km^2 say so in their names.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};
use crate::multilink::optimal_count_log2;
use crate::rng::StreamFamily;

pub const PER_KM2: f64 = 1e-6;

/// Converts points/km^2 to points/m^2.
pub fn per_km2(value: f64) -> f64 {
    value * PER_KM2
}

/// Sampling window, centred on the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Disk { radius: f64 },
    Square { side: f64 },
}

impl Region {
    pub fn area(&self) -> f64 {
        match *self {
            Region::Disk { radius } => std::f64::consts::PI * radius * radius,
            Region::Square { side } => side * side,
        }
    }

    pub fn contains(&self, [x, y]: [f64; 2]) -> bool {
        match *self {
            Region::Disk { radius } => x * x + y * y <= radius * radius,
            Region::Square { side } => x.abs() <= side / 2.0 && y.abs() <= side / 2.0,
        }
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match *self {
            Region::Disk { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                [r * theta.cos(), r * theta.sin()]
            }
            Region::Square { side } => {
                [side * (rng.random::<f64>() - 0.5), side * (rng.random::<f64>() - 0.5)]
            }
        }
    }
}

/// Access-point positions around a user at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub ap_positions: Vec<[f64; 2]>,
    /// Points/m^2; zero for fixed-count placements.
    pub intensity: f64,
    pub region: Region,
}

impl Deployment {
    pub fn len(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ap_positions.is_empty()
    }

    /// UE-AP distances, ascending.
    pub fn sorted_distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.ap_positions.iter().map(|[x, y]| x.hypot(*y)).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    /// Distances of the first `n` placed APs (in placement order), ascending.
    ///
    /// Taking placement-order prefixes of a uniform fixed-count placement
    /// gives nested deployments with `n` uniform APs each.
    pub fn prefix_distances(&self, n: usize) -> Vec<f64> {
        let mut d: Vec<f64> = self.ap_positions.iter().take(n).map(|[x, y]| x.hypot(*y)).collect();
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Homogeneous PPP: Poisson count, then i.i.d. uniform positions.
pub fn sample_ppp<R: Rng + ?Sized>(intensity: f64, region: Region, rng: &mut R) -> Result<Deployment> {
    let mean = intensity * region.area();
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(OffloadError::InvalidParameter(format!("invalid PPP mean count {mean}")));
    }
    let count = if mean == 0.0 {
        0
    } else {
        let poisson = Poisson::new(mean).map_err(|e| OffloadError::InvalidParameter(e.to_string()))?;
        poisson.sample(rng) as usize
    };
    let ap_positions = (0..count).map(|_| region.sample_point(rng)).collect();
    Ok(Deployment { ap_positions, intensity, region })
}

/// A fixed number of APs placed uniformly in the region.
pub fn sample_uniform<R: Rng + ?Sized>(count: usize, region: Region, rng: &mut R) -> Deployment {
    let ap_positions = (0..count).map(|_| region.sample_point(rng)).collect();
    Deployment { ap_positions, intensity: 0.0, region }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `P{Poisson(mean) <= k}`, summed in log space.
pub fn poisson_cdf(k: usize, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 1.0;
    }
    let ln_mean = mean.ln();
    let mut ln_fact = 0.0;
    let mut total = 0.0;
    for j in 0..=k {
        if j > 0 {
            ln_fact += (j as f64).ln();
        }
        total += (j as f64 * ln_mean - mean - ln_fact).exp();
    }
    total.min(1.0)
}

/// Density of the distance to the `i`-th closest point of a PPP.
pub fn distance_density(order: usize, intensity: f64, x: f64) -> f64 {
    assert!(order >= 1, "order index starts at 1");
    if x <= 0.0 {
        return 0.0;
    }
    let i = order as f64;
    let lp = intensity * std::f64::consts::PI;
    (std::f64::consts::LN_2 - ln_factorial(order - 1) + i * lp.ln() + (2.0 * i - 1.0) * x.ln() - lp * x * x).exp()
}

/// `P{d_i <= x}`: at least `i` points inside the disk of radius `x`.
pub fn distance_cdf(order: usize, intensity: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - poisson_cdf(order - 1, intensity * std::f64::consts::PI * x * x)
}

/// `N*` for ascending distances under a `d^-alpha` path loss.
pub fn n_star_of_distances(distances: &[f64], rate: f64, alpha: f64) -> usize {
    // Gains a_i = c d_i^-alpha; the constant cancels in every threshold.
    let lg: Vec<f64> = distances.iter().map(|d| -alpha * d.log2()).collect();
    optimal_count_log2(&lg, rate)
}

/// The events `E_2, ..., E_N` (`d_N^{N-1} < d_1...d_{N-1} A`), in log space.
pub fn link_events(distances: &[f64], rate: f64, alpha: f64) -> Vec<bool> {
    let log_a = rate / alpha;
    let mut prefix = distances.first().map_or(0.0, |d| d.log2());
    let mut out = Vec::with_capacity(distances.len().saturating_sub(1));
    for (k, d) in distances.iter().enumerate().skip(1) {
        let l = d.log2();
        out.push((k as f64) * l < prefix + log_a);
        prefix += l;
    }
    out
}

pub fn n_star_of_deployment(dep: &Deployment, rate: f64, alpha: f64) -> Result<usize> {
    if dep.is_empty() {
        return Err(OffloadError::EmptyDeployment);
    }
    Ok(n_star_of_distances(&dep.sorted_distances(), rate, alpha))
}

/// Analytic distribution of `N*`: `1 + Poisson(ln A^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStarDistribution {
    /// `A = 2^{R_min/alpha}`.
    pub a: f64,
    /// `ln A^2`.
    pub poisson_param: f64,
    /// `pmf[n - 1] = P{N* = n}`.
    pub pmf: Vec<f64>,
    /// Mass beyond the last tabulated `N`.
    pub tail: f64,
    /// Entries from this `N` on rest on the conjectured Poisson law; the
    /// first two have closed-form proofs.
    pub conjectured_from: usize,
}

impl NStarDistribution {
    pub fn mean(&self) -> f64 {
        self.poisson_param + 1.0
    }

    pub fn prob(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.pmf.get(n - 1).copied().unwrap_or(0.0)
        }
    }
}

pub fn n_star_pmf_analytic(rate: f64, alpha: f64, n_max: usize) -> NStarDistribution {
    let poisson_param = 2.0 * rate * std::f64::consts::LN_2 / alpha;
    let a = (rate / alpha).exp2();
    let mut pmf = Vec::with_capacity(n_max);
    let mut term = (-poisson_param).exp();
    for n in 1..=n_max {
        if n > 1 {
            term *= poisson_param / (n - 1) as f64;
        }
        pmf.push(term);
    }
    // Exact closed forms for the first two entries.
    if n_max >= 1 {
        pmf[0] = 1.0 / (a * a);
    }
    if n_max >= 2 {
        pmf[1] = (a * a).ln() / (a * a);
    }
    let tail = (1.0 - poisson_cdf(n_max.saturating_sub(1), poisson_param)).max(0.0);
    NStarDistribution { a, poisson_param, pmf, tail, conjectured_from: 3 }
}

/// Smallest `N` with `P{N* <= N} >= 1 - eps` under the analytic pmf.
pub fn m_epsilon(rate: f64, alpha: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OffloadError::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let lambda = 2.0 * rate * std::f64::consts::LN_2 / alpha;
    let mut term = (-lambda).exp();
    let mut cum = term;
    let mut n = 1;
    while cum < 1.0 - eps {
        term *= lambda / n as f64;
        cum += term;
        n += 1;
        if n > 100_000 {
            return Err(OffloadError::InvalidParameter("pmf does not accumulate; rate too large".into()));
        }
    }
    Ok(n)
}

/// Search limits for [`lambda_epsilon_delta`].
#[derive(Debug, Clone, Copy)]
pub struct DensitySearch {
    pub lambda_max_per_km2: f64,
}

impl Default for DensitySearch {
    fn default() -> Self {
        Self { lambda_max_per_km2: 1e9 }
    }
}

/// Minimum AP density (points/km^2) such that a disk of radius `r` holds at
/// least `M_eps` APs with probability at least `1 - delta`.
pub fn lambda_epsilon_delta(rate: f64, alpha: f64, eps: f64, delta: f64, radius: f64) -> Result<f64> {
    lambda_epsilon_delta_with(rate, alpha, eps, delta, radius, DensitySearch::default())
}

pub fn lambda_epsilon_delta_with(
    rate: f64,
    alpha: f64,
    eps: f64,
    delta: f64,
    radius: f64,
    search: DensitySearch,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) || !(radius > 0.0) {
        return Err(OffloadError::InvalidParameter("need 0 < delta < 1 and r > 0".into()));
    }
    let links = m_epsilon(rate, alpha, eps)?;
    let disk = std::f64::consts::PI * radius * radius;
    let mean_max = per_km2(search.lambda_max_per_km2) * disk;
    // sum_{i < M} m^i/i! <= delta e^m  <=>  P{Poisson(m) <= M-1} <= delta.
    let holds = |m: f64| poisson_cdf(links - 1, m) <= delta;

    let mut lo = 0.0;
    let mut hi = 1e-3f64.min(mean_max);
    while !holds(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > mean_max {
            if holds(mean_max) {
                hi = mean_max;
                break;
            }
            return Err(OffloadError::BracketingFailed { lambda_max: per_km2(search.lambda_max_per_km2) });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi / disk / PER_KM2)
}

/// Empirical `N*` histogram from independent PPP realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNStar {
    /// `counts[n - 1]` trials had `N* = n`.
    pub counts: Vec<u64>,
    pub trials: u64,
    /// Trials where some `E_N` held after an earlier one failed (expected 0).
    pub nesting_violations: u64,
    /// Trials where every AP in the window was used, so `N*` may be truncated.
    pub truncated: u64,
    /// Radius of the sampling disk, in m.
    pub radius: f64,
}

impl EmpiricalNStar {
    pub fn pmf(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64 / self.trials as f64).collect()
    }

    pub fn prob(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.counts.get(n - 1).map_or(0.0, |c| *c as f64 / self.trials as f64)
    }
}

/// Monte Carlo estimate of the `N*` distribution.
#[derive(Debug, Clone, Copy)]
pub struct NStarMonteCarlo {
    pub rate: f64,
    pub alpha: f64,
    /// Points/m^2.
    pub intensity: f64,
    pub trials: u64,
    /// Largest expected point count in the sampling disk.
    pub max_points: usize,
}

impl NStarMonteCarlo {
    pub fn new(rate: f64, alpha: f64, intensity: f64, trials: u64) -> Self {
        Self { rate, alpha, intensity, trials, max_points: 1_000_000 }
    }

    /// Radius such that the `N_cap`-th nearest AP falls outside with
    /// probability below 1e-4, where `N_cap = M_{1e-4} + 10`.
    pub fn window_radius(&self) -> Result<f64> {
        let cap = m_epsilon(self.rate, self.alpha, 1e-4)? + 10;
        let outside = |m: f64| poisson_cdf(cap - 1, m);
        let mut m = cap as f64;
        while outside(m) >= 1e-4 {
            m *= 1.25;
            if m > self.max_points as f64 {
                return Err(OffloadError::RegionTooSmall { expected: m, cap: self.max_points });
            }
        }
        Ok((m / (self.intensity * std::f64::consts::PI)).sqrt())
    }

    pub fn run(&self, streams: StreamFamily) -> Result<EmpiricalNStar> {
        if self.trials < 1000 {
            return Err(OffloadError::InvalidParameter(format!(
                "Monte Carlo needs at least 1000 trials, got {}",
                self.trials
            )));
        }
        if !(self.intensity > 0.0) {
            return Err(OffloadError::InvalidParameter("intensity must be positive".into()));
        }
        let radius = self.window_radius()?;
        let region = Region::Disk { radius };
        let (rate, alpha, intensity) = (self.rate, self.alpha, self.intensity);

        #[derive(Default)]
        struct Tally {
            counts: Vec<u64>,
            nesting: u64,
            truncated: u64,
        }
        let tally = (0..self.trials)
            .into_par_iter()
            .fold(Tally::default, |mut acc, trial| {
                let mut rng = streams.trial(trial);
                let dep = sample_ppp(intensity, region, &mut rng).expect("validated intensity");
                let d = dep.sorted_distances();
                if d.is_empty() {
                    acc.truncated += 1;
                    return acc;
                }
                let n = n_star_of_distances(&d, rate, alpha);
                let events = link_events(&d, rate, alpha);
                if events[n - 1..].iter().any(|e| *e) {
                    acc.nesting += 1;
                }
                if n == d.len() {
                    acc.truncated += 1;
                }
                if acc.counts.len() < n {
                    acc.counts.resize(n, 0);
                }
                acc.counts[n - 1] += 1;
                acc
            })
            .reduce(Tally::default, |mut a, b| {
                if a.counts.len() < b.counts.len() {
                    a.counts.resize(b.counts.len(), 0);
                }
                for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                    *x += y;
                }
                a.nesting += b.nesting;
                a.truncated += b.truncated;
                a
            });
        Ok(EmpiricalNStar {
            counts: tally.counts,
            trials: self.trials,
            nesting_violations: tally.nesting,
            truncated: tally.truncated,
            radius,
        })
    }
}

/// Convenience wrapper: intensity in points/m^2, seed-addressed streams.
pub fn n_star_pmf_montecarlo(rate: f64, alpha: f64, intensity: f64, trials: u64, seed: u64) -> Result<EmpiricalNStar> {
    NStarMonteCarlo::new(rate, alpha, intensity, trials).run(StreamFamily::new(seed, 0x004e_5354_4152))
}

/// Total variation distance between two pmfs over `N = 1, 2, ...`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (get(p, i) - get(q, i)).abs()).sum::<f64>()
}
