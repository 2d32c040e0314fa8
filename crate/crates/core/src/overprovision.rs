//! Power overprovisioning against random link blockage.
//!
//! Each link is open independently with probability `1 - P_i`. Powers may
//! depend on the open set; the goal is the least average power whose average
//! rate over all open sets reaches `R_min`. The stationarity conditions give a
//! common water level `gamma`, with link `i` using `[gamma/ln2 - 1/a_i]^+`
//! whenever it is open, regardless of which other links are open.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{OffloadError, Result};

/// Largest link count whose open/blocked states are enumerated.
pub const MAX_STATE_LINKS: usize = 20;

/// All `2^N` open/blocked configurations with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStateSpace {
    n_links: usize,
    /// Bit `i` set means link `i` is open.
    masks: Vec<u32>,
    probs: Vec<f64>,
}

impl LinkStateSpace {
    pub fn new(blocking: &[f64]) -> Result<Self> {
        let n = blocking.len();
        if n > MAX_STATE_LINKS {
            return Err(OffloadError::InvalidParameter(format!(
                "state enumeration supports at most {MAX_STATE_LINKS} links, got {n}"
            )));
        }
        check_probs(blocking)?;
        let masks: Vec<u32> = (0..1u32 << n).collect();
        let probs = masks
            .iter()
            .map(|m| {
                blocking
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if m >> i & 1 == 1 { 1.0 - p } else { *p })
                    .product()
            })
            .collect();
        Ok(Self { n_links: n, masks, probs })
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn states(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.masks.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn open_links(mask: u32) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| mask >> i & 1 == 1)
    }

    /// Average rate when link `i` uses `powers[i]` whenever it is open.
    pub fn average_rate(&self, gains: &[f64], powers: &[f64]) -> f64 {
        self.states()
            .map(|(m, pr)| pr * Self::open_links(m).map(|i| (gains[i] * powers[i]).ln_1p() / LN_2).sum::<f64>())
            .sum()
    }

    /// Average transmit power; the all-blocked state spends nothing.
    pub fn average_power(&self, powers: &[f64]) -> f64 {
        self.states().map(|(m, pr)| pr * Self::open_links(m).map(|i| powers[i]).sum::<f64>()).sum()
    }

    /// Largest total transmit power over states with positive probability.
    pub fn peak_state_power(&self, powers: &[f64]) -> f64 {
        self.states()
            .filter(|(_, pr)| *pr > 0.0)
            .map(|(m, _)| Self::open_links(m).map(|i| powers[i]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn check_probs(blocking: &[f64]) -> Result<()> {
    if blocking.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(OffloadError::InvalidParameter("blocking probabilities must lie in [0, 1]".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetStatus {
    /// Every multiplier except the rate constraint's is zero.
    Interior,
    /// Some power or budget bound is active at the optimum.
    Constrained,
    /// The interior solution breaks the per-state budget; it is still attached.
    Infeasible,
}

/// Per-state powers for two links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLinkPowers {
    /// Link 1 open, link 2 blocked.
    pub only_first: f64,
    /// Link 2 open, link 1 blocked.
    pub only_second: f64,
    /// Both open.
    pub both: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverprovisionSolution {
    /// Rate-constraint multiplier.
    pub water_level: f64,
    /// Power of each link while open; for constrained two-link solutions this
    /// is the both-open state.
    pub per_link_power: Vec<f64>,
    pub average_power: f64,
    pub average_rate: f64,
    pub budget_status: BudgetStatus,
    pub state_powers: Option<TwoLinkPowers>,
}

impl OverprovisionSolution {
    fn interior(gains: &[f64], blocking: &[f64], log2_level: f64) -> Self {
        let level = log2_level.exp2();
        let per_link_power: Vec<f64> = gains.iter().map(|a| (level - 1.0 / a).max(0.0)).collect();
        let average_power = per_link_power.iter().zip(blocking).map(|(p, b)| (1.0 - b) * p).sum();
        let average_rate = average_rate_linear(gains, blocking, &per_link_power);
        Self {
            water_level: LN_2 * level,
            per_link_power,
            average_power,
            average_rate,
            budget_status: BudgetStatus::Interior,
            state_powers: None,
        }
    }
}

/// Average rate via linearity: `sum_i (1 - P_i) log2(1 + a_i p_i)`.
pub fn average_rate_linear(gains: &[f64], blocking: &[f64], powers: &[f64]) -> f64 {
    gains
        .iter()
        .zip(blocking)
        .zip(powers)
        .map(|((a, b), p)| (1.0 - b) * (a * p).ln_1p() / LN_2)
        .sum()
}

/// Water-filling on the log2 water level `w = log2(gamma / ln2)`.
///
/// The average rate `sum_i (1-P_i) [w + log2 a_i]^+` is increasing and
/// piecewise linear in `w`. Bisection locates the segment containing the
/// target; the level is then solved exactly on that segment.
pub fn solve_waterfill(gains: &ChannelSet, blocking: &[f64], rate: f64, budget: Option<f64>) -> Result<OverprovisionSolution> {
    let a = gains.gains();
    if blocking.len() != a.len() {
        return Err(OffloadError::InvalidParameter("one blocking probability per link required".into()));
    }
    check_probs(blocking)?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(OffloadError::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    let open: Vec<f64> = blocking.iter().map(|p| 1.0 - p).collect();
    let open_total: f64 = open.iter().sum();
    if !(open_total > 0.0) {
        return Err(OffloadError::DegenerateAllBlocked);
    }
    let lg: Vec<f64> = a.iter().map(|g| g.log2()).collect();
    let avg_rate = |w: f64| -> f64 { lg.iter().zip(&open).map(|(l, o)| o * (w + l).max(0.0)).sum() };

    let max_neg = lg.iter().fold(f64::NEG_INFINITY, |m, l| m.max(-l));
    let mut lo = -lg[0];
    // Every link gets at least R/sum(1-P_i) above its threshold here; pad for rounding.
    let mut hi = max_neg + rate / open_total + 1.0;
    if !(avg_rate(hi) >= rate) || !hi.is_finite() {
        return Err(OffloadError::BisectionNoBracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if avg_rate(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if (avg_rate(hi) - rate).abs() <= 1e-12 * rate.max(1.0) {
            break;
        }
    }
    // Exact solve on the segment: links whose threshold lies below the level.
    let active: Vec<usize> = (0..a.len()).filter(|&i| hi + lg[i] > 0.0 && open[i] > 0.0).collect();
    let weight: f64 = active.iter().map(|&i| open[i]).sum();
    let offset: f64 = active.iter().map(|&i| open[i] * lg[i]).sum();
    let mut w = (rate - offset) / weight;
    if !(w.is_finite() && w >= lo - 1e-9 && w <= hi + 1e-9) {
        w = hi;
    }

    let mut sol = OverprovisionSolution::interior(a, blocking, w);
    if let Some(p_t) = budget {
        let peak: f64 = sol.per_link_power.iter().zip(blocking).filter(|(_, b)| **b < 1.0).map(|(p, _)| p).sum();
        if peak > p_t {
            sol.budget_status = BudgetStatus::Infeasible;
        }
    }
    Ok(sol)
}

fn check_two(a1: f64, a2: f64, p1: f64, p2: f64, rate: f64) -> Result<()> {
    if !(a1 >= a2 && a2 > 0.0 && a1.is_finite()) {
        return Err(OffloadError::InvalidParameter("need a1 >= a2 > 0".into()));
    }
    check_probs(&[p1, p2])?;
    if p1 + p2 >= 2.0 {
        return Err(OffloadError::DegenerateAllBlocked);
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(OffloadError::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    Ok(())
}

/// Two-link solution when both links carry power in every open state.
pub fn solve_two_link_closed_form(a1: f64, a2: f64, p1: f64, p2: f64, rate: f64) -> Result<OverprovisionSolution> {
    check_two(a1, a2, p1, p2, rate)?;
    let w = (rate - (1.0 - p1) * a1.log2() - (1.0 - p2) * a2.log2()) / (2.0 - p1 - p2);
    let level = w.exp2();
    if level - 1.0 / a1 < 0.0 || level - 1.0 / a2 < 0.0 {
        return two_link_active_set(a1, a2, p1, p2, rate, f64::INFINITY);
    }
    Ok(OverprovisionSolution::interior(&[a1, a2], &[p1, p2], w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Zero,
    Free,
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BothState {
    Zero,
    FirstFree,
    SecondFree,
    BothFree,
    /// Sum cap active with both powers positive.
    SplitCap,
    /// Sum cap active, all power on link 1.
    FirstCap,
    /// Sum cap active, all power on link 2.
    SecondCap,
}

/// Exact two-link KKT solution with per-state budget `budget`.
///
/// The single-open states cap each power at `budget`; the both-open state
/// caps the sum. Every combination of active bounds is solved in closed form
/// and checked for primal and dual feasibility; the cheapest survivor wins.
pub fn two_link_active_set(a1: f64, a2: f64, p1: f64, p2: f64, rate: f64, budget: f64) -> Result<OverprovisionSolution> {
    check_two(a1, a2, p1, p2, rate)?;
    if !(budget > 0.0) {
        return Err(OffloadError::InvalidParameter("budget must be positive".into()));
    }
    let pi1 = (1.0 - p1) * p2;
    let pi2 = p1 * (1.0 - p2);
    let pi12 = (1.0 - p1) * (1.0 - p2);
    let (l1, l2) = (a1.log2(), a2.log2());
    let lg = |a: f64, p: f64| (a * p).ln_1p() / LN_2;

    let capped = budget.is_finite();
    let singles: &[Bound] = if capped { &[Bound::Zero, Bound::Free, Bound::Cap] } else { &[Bound::Zero, Bound::Free] };
    let boths: &[BothState] = if capped {
        &[
            BothState::Zero,
            BothState::FirstFree,
            BothState::SecondFree,
            BothState::BothFree,
            BothState::SplitCap,
            BothState::FirstCap,
            BothState::SecondCap,
        ]
    } else {
        &[BothState::Zero, BothState::FirstFree, BothState::SecondFree, BothState::BothFree]
    };
    // Level for a sum cap split over both links.
    let split_level = (budget + 1.0 / a1 + 1.0 / a2) / 2.0;
    let tol = 1e-12;

    let mut best: Option<OverprovisionSolution> = None;
    for &s1 in singles {
        for &s2 in singles {
            for &b in boths {
                // Rate = slope * w + constant, w = log2(gamma / ln2).
                let mut slope = 0.0;
                let mut constant = 0.0;
                let mut add = |weight: f64, bound: Bound, a: f64, l: f64| match bound {
                    Bound::Zero => {}
                    Bound::Free => {
                        slope += weight;
                        constant += weight * l;
                    }
                    Bound::Cap => constant += weight * lg(a, budget),
                };
                add(pi1, s1, a1, l1);
                add(pi2, s2, a2, l2);
                match b {
                    BothState::Zero => {}
                    BothState::FirstFree => add(pi12, Bound::Free, a1, l1),
                    BothState::SecondFree => add(pi12, Bound::Free, a2, l2),
                    BothState::BothFree => {
                        add(pi12, Bound::Free, a1, l1);
                        add(pi12, Bound::Free, a2, l2);
                    }
                    BothState::SplitCap => {
                        constant += pi12 * (lg(a1, split_level - 1.0 / a1) + lg(a2, split_level - 1.0 / a2))
                    }
                    BothState::FirstCap => add(pi12, Bound::Cap, a1, l1),
                    BothState::SecondCap => add(pi12, Bound::Cap, a2, l2),
                }
                if slope <= 0.0 {
                    continue;
                }
                let w = (rate - constant) / slope;
                let level = w.exp2();

                let single = |bound: Bound, a: f64, weight: f64| -> Option<f64> {
                    if weight == 0.0 {
                        return (bound == Bound::Zero).then_some(0.0);
                    }
                    match bound {
                        Bound::Zero => (level <= 1.0 / a * (1.0 + tol)).then_some(0.0),
                        Bound::Free => {
                            let p = level - 1.0 / a;
                            (p >= -tol / a && (!capped || p <= budget * (1.0 + tol))).then_some(p.max(0.0))
                        }
                        Bound::Cap => (level >= (budget + 1.0 / a) * (1.0 - tol)).then_some(budget),
                    }
                };
                let Some(x1) = single(s1, a1, pi1) else { continue };
                let Some(x2) = single(s2, a2, pi2) else { continue };

                let both = if pi12 == 0.0 {
                    if b != BothState::Zero {
                        continue;
                    }
                    Some([0.0, 0.0])
                } else {
                    let free = |a: f64| level - 1.0 / a;
                    let zero_ok = |a: f64, lvl: f64| lvl <= 1.0 / a * (1.0 + tol);
                    let sum_ok = |s: f64| !capped || s <= budget * (1.0 + tol);
                    match b {
                        BothState::Zero => (zero_ok(a1, level) && zero_ok(a2, level)).then_some([0.0, 0.0]),
                        BothState::FirstFree => {
                            let q = free(a1);
                            (q >= -tol / a1 && zero_ok(a2, level) && sum_ok(q)).then_some([q.max(0.0), 0.0])
                        }
                        BothState::SecondFree => {
                            let q = free(a2);
                            (q >= -tol / a2 && zero_ok(a1, level) && sum_ok(q)).then_some([0.0, q.max(0.0)])
                        }
                        BothState::BothFree => {
                            let (q1, q2) = (free(a1), free(a2));
                            (q1 >= -tol / a1 && q2 >= -tol / a2 && sum_ok(q1 + q2))
                                .then_some([q1.max(0.0), q2.max(0.0)])
                        }
                        BothState::SplitCap => {
                            let (q1, q2) = (split_level - 1.0 / a1, split_level - 1.0 / a2);
                            (q1 >= 0.0 && q2 >= 0.0 && level >= split_level * (1.0 - tol)).then_some([q1, q2])
                        }
                        BothState::FirstCap => {
                            let lvl = budget + 1.0 / a1;
                            (level >= lvl * (1.0 - tol) && zero_ok(a2, lvl)).then_some([budget, 0.0])
                        }
                        BothState::SecondCap => {
                            let lvl = budget + 1.0 / a2;
                            (level >= lvl * (1.0 - tol) && zero_ok(a1, lvl)).then_some([0.0, budget])
                        }
                    }
                };
                let Some(both) = both else { continue };

                let average_power = pi1 * x1 + pi2 * x2 + pi12 * (both[0] + both[1]);
                let average_rate = pi1 * lg(a1, x1) + pi2 * lg(a2, x2) + pi12 * (lg(a1, both[0]) + lg(a2, both[1]));
                if (average_rate - rate).abs() > 1e-9 * rate.max(1.0) {
                    continue;
                }
                let interior = s1 != Bound::Cap
                    && s2 != Bound::Cap
                    && matches!(b, BothState::Zero | BothState::FirstFree | BothState::SecondFree | BothState::BothFree);
                let cand = OverprovisionSolution {
                    water_level: LN_2 * level,
                    per_link_power: both.to_vec(),
                    average_power,
                    average_rate,
                    budget_status: if interior { BudgetStatus::Interior } else { BudgetStatus::Constrained },
                    state_powers: Some(TwoLinkPowers { only_first: x1, only_second: x2, both }),
                };
                if best.as_ref().is_none_or(|b| cand.average_power < b.average_power) {
                    best = Some(cand);
                }
            }
        }
    }
    best.ok_or(OffloadError::Infeasible)
}

/// Average power of sending everything over link 1 at rate `R_min / (1 - P_1)`.
pub fn single_link_overprovisioned_power(a1: f64, p1: f64, rate: f64) -> f64 {
    (1.0 - p1) * crate::channel::exp2_m1(rate / (1.0 - p1)) / a1
}
