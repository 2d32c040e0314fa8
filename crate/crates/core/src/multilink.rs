//! Transmit-power minimization over several simultaneous line-of-sight links.
//!
//! The information is split so that every used link finishes at the same
//! time, which forces the rates to sum to `R_min`. The optimal split over the
//! best `N` links is a water-filling in the log domain: every used link gets
//! `R_i = R_min/N + log2 a_i - mean_j log2 a_j`. The number of links worth
//! using is the largest `N` whose threshold
//! `a_1 ... a_{N-1} / a_N^{N-1}` is strictly below `2^R_min`; the thresholds
//! are non-decreasing, so a linear scan finds it.
//!
//! All thresholds are evaluated in `log2`, which keeps products of many gains
//! in range and makes power-of-two ties exact.

use serde::{Deserialize, Serialize};

use crate::channel::{exp2_m1, r_min, ChannelSet, OffloadTask};
use crate::error::{OffloadError, Result};

/// Per-link rates, bit counts and powers for the links actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub links_used: usize,
    /// Spectral efficiency per used link, best link first.
    pub rates: Vec<f64>,
    /// Integer bits per used link; sums to the task's bit count.
    pub bits: Vec<u64>,
    /// Transmit power per used link, in W.
    pub powers: Vec<f64>,
    pub total_power: f64,
}

impl AllocationPlan {
    fn from_rates(gains: &[f64], rates: Vec<f64>, bits: u64) -> Self {
        let powers: Vec<f64> = rates.iter().zip(gains).map(|(r, a)| exp2_m1(*r) / a).collect();
        let total_power = powers.iter().sum();
        let bits = split_bits(bits, &rates);
        Self { links_used: rates.len(), rates, bits, powers, total_power }
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Splits `total` bits proportionally to `weights`: every link but the first
/// gets the floor of its share and the first link takes the remainder.
pub fn split_bits(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len());
    out.push(0);
    let mut assigned = 0u64;
    for w in &weights[1..] {
        let share = ((total as f64) * w / sum).floor().max(0.0) as u64;
        let share = share.min(total - assigned);
        assigned += share;
        out.push(share);
    }
    out[0] = total - assigned;
    out
}

fn log2_gains(gains: &[f64]) -> Vec<f64> {
    gains.iter().map(|g| g.log2()).collect()
}

/// `log2` of the link-count thresholds `a_1...a_{k-1} / a_k^{k-1}` for `k = 1..=N`.
///
/// The first entry is the empty product, 0.
pub fn link_count_thresholds(gains: &ChannelSet) -> Vec<f64> {
    let lg = log2_gains(gains.gains());
    let mut prefix = 0.0;
    let mut out = Vec::with_capacity(lg.len());
    for (k, l) in lg.iter().enumerate() {
        out.push(prefix - k as f64 * l);
        prefix += l;
    }
    out
}

/// Number of best links to use, given gains in `log2` sorted best-first.
pub(crate) fn optimal_count_log2(log2_gains: &[f64], rate: f64) -> usize {
    let mut count = 1;
    let mut prefix = log2_gains[0];
    while count < log2_gains.len() {
        let next = log2_gains[count];
        let threshold = prefix - count as f64 * next;
        if threshold < rate {
            prefix += next;
            count += 1;
        } else {
            break;
        }
    }
    count
}

/// The power-optimal number of simultaneous links `N*`.
///
/// The left threshold inequality is strict and the right one is not, so a
/// threshold exactly equal to `2^R_min` excludes the extra link.
pub fn optimal_link_count(gains: &ChannelSet, rate: f64) -> usize {
    optimal_count_log2(&log2_gains(gains.gains()), rate)
}

/// Power-optimal rates over the best `n` links, assuming all `n` are used.
fn rates_over(log2_gains: &[f64], rate: f64) -> Vec<f64> {
    let n = log2_gains.len() as f64;
    let mean = log2_gains.iter().sum::<f64>() / n;
    log2_gains.iter().map(|l| rate / n + l - mean).collect()
}

/// Minimum-power plan for a target rate and bit count.
pub fn allocate_rate(gains: &ChannelSet, rate: f64, bits: u64) -> Result<AllocationPlan> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(OffloadError::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    let lg = log2_gains(gains.gains());
    let used = optimal_count_log2(&lg, rate);
    let rates = rates_over(&lg[..used], rate);
    Ok(AllocationPlan::from_rates(&gains.gains()[..used], rates, bits))
}

/// Minimum-power plan for an offloading task, optionally checked against a
/// budget on the summed transmit power.
pub fn allocate(gains: &ChannelSet, task: &OffloadTask, budget: Option<f64>) -> Result<AllocationPlan> {
    let rate = r_min(task)?;
    let plan = allocate_rate(gains, rate, task.bits)?;
    if let Some(budget) = budget {
        if plan.total_power > budget {
            return Err(OffloadError::BudgetExceeded { required: plan.total_power, budget });
        }
    }
    Ok(plan)
}

/// Total power `N (2^R / prod a_i)^(1/N) - sum 1/a_i` when all given links are used.
pub fn all_links_power(gains: &[f64], rate: f64) -> f64 {
    let n = gains.len() as f64;
    let mean_log = gains.iter().map(|g| g.log2()).sum::<f64>() / n;
    n * (rate / n - mean_log).exp2() - gains.iter().map(|g| 1.0 / g).sum::<f64>()
}

/// Two-link split: both links are used iff `2^R_min > a1/a2`.
pub fn two_link_allocate(a1: f64, a2: f64, rate: f64, bits: u64) -> Result<AllocationPlan> {
    if !(a2 > 0.0) || a1 < a2 {
        return Err(OffloadError::InvalidParameter(format!("need a1 >= a2 > 0, got {a1}, {a2}")));
    }
    if !(rate > 0.0) {
        return Err(OffloadError::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    let ratio = (a1 / a2).log2();
    if rate > ratio {
        let r1 = rate / 2.0 + ratio / 2.0;
        Ok(AllocationPlan::from_rates(&[a1, a2], vec![r1, rate - r1], bits))
    } else {
        Ok(AllocationPlan::from_rates(&[a1], vec![rate], bits))
    }
}

/// Exhaustive search over a rate grid on the simplex `{R_i >= 0, sum R_i = R_min}`.
#[derive(Debug, Clone, Copy)]
pub struct GridOracle {
    pub step: f64,
    /// Upper bound on table updates (`N * (M+1)^2 / 2` for `M` grid steps).
    pub work_budget: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub total_power: f64,
    pub rates: Vec<f64>,
}

impl GridOracle {
    pub fn new(step: f64) -> Self {
        Self { step, work_budget: 2_000_000_000 }
    }

    /// Minimum of `sum (2^{R_i} - 1)/a_i` over every grid point of the simplex.
    ///
    /// The grid uses `M = ceil(R_min/step)` equal steps so the simplex boundary
    /// is hit exactly. Minimization over all grid points is separable, so it is
    /// carried out as repeated min-plus convolutions of the per-link cost
    /// tables; the result is the exact grid minimum.
    pub fn search(&self, gains: &ChannelSet, rate: f64) -> Result<GridOptimum> {
        if !(self.step > 0.0) || !(rate > 0.0) {
            return Err(OffloadError::InvalidParameter("grid step and rate must be positive".into()));
        }
        let steps = (rate / self.step).ceil().max(1.0) as usize;
        let h = rate / steps as f64;
        let n = gains.len();
        let work = n as u128 * (steps as u128 + 1) * (steps as u128 + 2) / 2;
        if work > self.work_budget {
            return Err(OffloadError::OracleTooLarge { work, budget: self.work_budget });
        }
        let cost = |a: f64| -> Vec<f64> { (0..=steps).map(|k| exp2_m1(k as f64 * h) / a).collect() };

        // best[r] = minimum power of the first links carrying r grid steps.
        let mut best = cost(gains.gains()[0]);
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(n.saturating_sub(1));
        for &a in &gains.gains()[1..] {
            let own = cost(a);
            let mut next = vec![f64::INFINITY; steps + 1];
            let mut pick = vec![0usize; steps + 1];
            for r in 0..=steps {
                for c in 0..=r {
                    let v = best[r - c] + own[c];
                    if v < next[r] {
                        next[r] = v;
                        pick[r] = c;
                    }
                }
            }
            best = next;
            choices.push(pick);
        }

        let mut rates = vec![0.0; n];
        let mut remaining = steps;
        for (i, pick) in choices.iter().enumerate().rev() {
            let c = pick[remaining];
            rates[i + 1] = c as f64 * h;
            remaining -= c;
        }
        rates[0] = remaining as f64 * h;
        Ok(GridOptimum { total_power: best[steps], rates })
    }
}

/// Grid-search minimum total power with the default work budget.
pub fn grid_oracle(gains: &ChannelSet, rate: f64, step: f64) -> Result<f64> {
    GridOracle::new(step).search(gains, rate).map(|o| o.total_power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::single_link_min_power;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn set(g: &[f64]) -> ChannelSet {
        ChannelSet::new(g.to_vec()).unwrap()
    }

    #[test]
    fn equal_gains_split_evenly() {
        let p = two_link_allocate(3.0, 3.0, 5.0, 100).unwrap();
        assert_eq!(p.links_used, 2);
        assert_relative_eq!(p.rates[0], 2.5);
        assert_relative_eq!(p.rates[1], 2.5);
        assert_eq!(p.bits, vec![50, 50]);
    }

    #[test]
    fn two_link_example() {
        let p = two_link_allocate(4.0, 2.0, 3.0, 3000).unwrap();
        assert_eq!(p.links_used, 2);
        assert_relative_eq!(p.rates[0], 2.0);
        assert_relative_eq!(p.rates[1], 1.0);
        assert_relative_eq!(p.powers[0], 0.75);
        assert_relative_eq!(p.powers[1], 0.5);
        assert_relative_eq!(p.total_power, 1.25);
        assert!(p.total_power < single_link_min_power(4.0, 3.0));
        // Closed form 2^{R/2+1}/sqrt(a1 a2) - (1/a1 + 1/a2).
        let closed = 2f64.powf(3.0 / 2.0 + 1.0) / 8f64.sqrt() - (0.25 + 0.5);
        assert_relative_eq!(p.total_power, closed, max_relative = 1e-12);
    }

    #[test]
    fn two_link_boundary_is_strict() {
        let p = two_link_allocate(8.0, 2.0, 2.0, 10).unwrap();
        assert_eq!(p.links_used, 1);
        assert_relative_eq!(p.total_power, 0.375);
        assert_eq!(p.bits, vec![10]);
    }

    #[test]
    fn link_count_examples() {
        assert_eq!(optimal_link_count(&set(&[8.0, 2.0, 1.0]), 2.0), 1);
        assert_eq!(optimal_link_count(&set(&[4.0, 2.0, 1.0]), 3.0), 2);
        assert_eq!(optimal_link_count(&set(&[5.0, 4.9, 4.8]), 1e-9), 1);
        assert_eq!(optimal_link_count(&set(&[1.0, 1.0, 1.0, 1.0]), 4.0), 4);
        assert_eq!(optimal_link_count(&set(&[2.0]), 40.0), 1);
    }

    #[test]
    fn allocate_examples() {
        let plan = allocate_rate(&set(&[4.0, 2.0]), 3.0, 3000).unwrap();
        assert_eq!(plan.bits, vec![2000, 1000]);
        assert_relative_eq!(plan.total_power, 1.25, max_relative = 1e-12);
        for (n, r) in plan.bits.iter().zip(&plan.rates) {
            assert_relative_eq!(*n as f64 / r, 1000.0, max_relative = 1e-9);
        }

        let plan = allocate_rate(&set(&[1.0; 4]), 4.0, 400).unwrap();
        assert_eq!(plan.links_used, 4);
        for r in &plan.rates {
            assert_relative_eq!(*r, 1.0, max_relative = 1e-12);
        }
        // N 2^{R/N} - N with unit gains.
        assert_relative_eq!(plan.total_power, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn single_link_reduces_to_baseline() {
        let plan = allocate_rate(&set(&[7.0]), 3.3, 123).unwrap();
        assert_eq!(plan.links_used, 1);
        assert_eq!(plan.bits, vec![123]);
        assert_relative_eq!(plan.total_power, single_link_min_power(7.0, 3.3), max_relative = 1e-14);
    }

    #[test]
    fn allocate_checks_task_and_budget() {
        let g = set(&[4.0, 2.0]);
        let task = OffloadTask::new(3000, 0.0, 1.0, 0.0, 1e-3, 1e6).unwrap();
        let plan = allocate(&g, &task, None).unwrap();
        assert_relative_eq!(plan.sum_rate(), 3.0, max_relative = 1e-12);
        assert!(matches!(allocate(&g, &task, Some(1.0)), Err(OffloadError::BudgetExceeded { .. })));
        assert!(allocate(&g, &task, Some(1.25 + 1e-9)).is_ok());
        let late = OffloadTask::new(3000, 2e6, 1e9, 0.0, 1e-3, 1e6).unwrap();
        assert!(matches!(allocate(&g, &late, None), Err(OffloadError::LatencyInfeasible { .. })));
    }

    #[test]
    fn bit_split_remainder_goes_to_best_link() {
        assert_eq!(split_bits(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(split_bits(7, &[2.0]), vec![7]);
    }

    #[test]
    fn oracle_examples() {
        let o = GridOracle::new(0.005).search(&set(&[4.0, 2.0]), 3.0).unwrap();
        assert!(o.total_power >= 1.25 - 1e-9);
        assert!(o.total_power <= 1.25 * 1.01);

        let o = GridOracle::new(0.005).search(&set(&[3.0]), 2.5).unwrap();
        assert_eq!(o.total_power, exp2_m1(2.5) / 3.0);

        let o = GridOracle::new(0.005).search(&set(&[8.0, 2.0]), 2.0).unwrap();
        assert_relative_eq!(o.rates[0], 2.0, max_relative = 1e-12);
        assert_eq!(o.rates[1], 0.0);
        assert_relative_eq!(o.total_power, 0.375, max_relative = 1e-12);
    }

    #[test]
    fn oracle_budget() {
        let oracle = GridOracle { step: 1e-4, work_budget: 1000 };
        assert!(matches!(oracle.search(&set(&[1.0, 1.0]), 1.0), Err(OffloadError::OracleTooLarge { .. })));
    }

    fn gains_strategy(max_n: usize) -> impl Strategy<Value = ChannelSet> {
        prop::collection::vec(-2.0f64..1.0, 1..=max_n)
            .prop_map(|e| ChannelSet::from_unsorted(e.into_iter().map(|x| 10f64.powf(x)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn plan_invariants(g in gains_strategy(8), rate in 0.05f64..20.0, bits in 1u64..10_000_000) {
            let plan = allocate_rate(&g, rate, bits).unwrap();
            prop_assert!((plan.sum_rate() - rate).abs() <= 1e-9);
            prop_assert_eq!(plan.bits.iter().sum::<u64>(), bits);
            for ((r, p), a) in plan.rates.iter().zip(&plan.powers).zip(g.gains()) {
                prop_assert!(*r > 0.0);
                let direct = exp2_m1(*r) / a;
                prop_assert!((p - direct).abs() <= 1e-12 * direct);
            }
            let closed = all_links_power(&g.gains()[..plan.links_used], rate);
            prop_assert!((plan.total_power - closed).abs() <= 1e-9 * closed.max(1e-300) + 1e-12);
        }

        #[test]
        fn thresholds_non_decreasing(g in gains_strategy(10)) {
            let t = link_count_thresholds(&g);
            for w in t.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }

        #[test]
        fn more_links_never_cost_more(g in gains_strategy(6), rate in 0.1f64..16.0, extra in -3.0f64..0.0) {
            let weaker = g.gains().last().unwrap() * 10f64.powf(extra);
            let mut more = g.gains().to_vec();
            more.push(weaker);
            let before = allocate_rate(&g, rate, 1).unwrap().total_power;
            let after = allocate_rate(&ChannelSet::new(more).unwrap(), rate, 1).unwrap().total_power;
            prop_assert!(after <= before * (1.0 + 1e-12));
        }

        #[test]
        fn scale_covariance(g in gains_strategy(6), rate in 0.1f64..12.0, c in 0.01f64..100.0) {
            let base = allocate_rate(&g, rate, 5000).unwrap();
            let scaled = allocate_rate(&g.scaled(c).unwrap(), rate, 5000).unwrap();
            prop_assert_eq!(base.links_used, scaled.links_used);
            prop_assert_eq!(&base.bits, &scaled.bits);
            for (r, s) in base.rates.iter().zip(&scaled.rates) {
                prop_assert!((r - s).abs() <= 1e-9);
            }
            for (p, s) in base.powers.iter().zip(&scaled.powers) {
                prop_assert!((p / c - s).abs() <= 1e-9 * s.abs());
            }
        }

        #[test]
        fn two_link_consistency(x in -2.0f64..1.0, y in -2.0f64..1.0, rate in 0.05f64..16.0) {
            let (a1, a2) = (10f64.powf(x.max(y)), 10f64.powf(x.min(y)));
            let general = allocate_rate(&set(&[a1, a2]), rate, 1000).unwrap();
            let special = two_link_allocate(a1, a2, rate, 1000).unwrap();
            prop_assert_eq!(general.links_used, special.links_used);
            prop_assert!((general.total_power - special.total_power).abs() <= 1e-12 * special.total_power);
        }
    }
}
