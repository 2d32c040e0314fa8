//! Coding across links that fail as whole blocks.
//!
//! A codeword of `n_c` bits is split into blocks of lengths
//! `n_1 >= ... >= n_N`, one per link; block `i` is erased with probability
//! `P_i` (non-decreasing in `i`). Decoding needs at least `n_c R_C` received
//! bits, so the outage event is `sum_i (1 - e_i) n_i < n_c R_C`.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{OffloadError, Result};
use crate::multilink::{allocate_rate, optimal_link_count, AllocationPlan};

/// Largest block count for exhaustive outage enumeration.
pub const MAX_OUTAGE_BLOCKS: usize = 25;
/// Largest block count for exhaustive word-error enumeration.
pub const MAX_PATTERN_BLOCKS: usize = 20;
/// Largest code dimension for codeword enumeration.
pub const MAX_CODE_DIMENSION: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCodeSpec {
    block_lengths: Vec<u64>,
    erasure_probs: Vec<f64>,
    /// `n_c R_C`, kept real-valued so rounding never moves the threshold.
    info_bits: f64,
}

impl BlockCodeSpec {
    pub fn new(block_lengths: Vec<u64>, erasure_probs: Vec<f64>, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(OffloadError::InvalidParameter(format!("code rate must lie in (0, 1], got {rate}")));
        }
        let n_c: u64 = block_lengths.iter().sum();
        Self::from_info_bits(block_lengths, erasure_probs, rate * n_c as f64)
    }

    /// Spec with an explicit information-bit threshold `n_b = n_c R_C`.
    pub fn from_info_bits(block_lengths: Vec<u64>, erasure_probs: Vec<f64>, info_bits: f64) -> Result<Self> {
        if block_lengths.is_empty() || block_lengths.len() != erasure_probs.len() {
            return Err(OffloadError::InvalidParameter("need one erasure probability per block".into()));
        }
        if block_lengths.windows(2).any(|w| w[0] < w[1]) {
            return Err(OffloadError::InvalidParameter("block lengths must be non-increasing".into()));
        }
        if erasure_probs.iter().any(|p| !(0.0..=1.0).contains(p)) || erasure_probs.windows(2).any(|w| w[0] > w[1]) {
            return Err(OffloadError::InvalidParameter(
                "erasure probabilities must lie in [0, 1] and be non-decreasing".into(),
            ));
        }
        let n_c: u64 = block_lengths.iter().sum();
        if !(info_bits > 0.0 && info_bits <= n_c as f64) {
            return Err(OffloadError::InvalidParameter(format!(
                "information bits {info_bits} must lie in (0, {n_c}]"
            )));
        }
        Ok(Self { block_lengths, erasure_probs, info_bits })
    }

    pub fn n_blocks(&self) -> usize {
        self.block_lengths.len()
    }

    pub fn block_lengths(&self) -> &[u64] {
        &self.block_lengths
    }

    pub fn erasure_probs(&self) -> &[f64] {
        &self.erasure_probs
    }

    pub fn n_c(&self) -> u64 {
        self.block_lengths.iter().sum()
    }

    pub fn info_bits(&self) -> f64 {
        self.info_bits
    }

    pub fn rate(&self) -> f64 {
        self.info_bits / self.n_c() as f64
    }

    /// Largest `j` with `n_1 + ... + n_j < n_c R_C`.
    pub fn j_index(&self) -> usize {
        let mut total = 0u64;
        let mut j = 0;
        for &n in &self.block_lengths {
            total += n;
            if (total as f64) < self.info_bits {
                j += 1;
            } else {
                break;
            }
        }
        j
    }

    /// The `l` in `1..=N` with `n_{l+1} + ... + n_N < n_c R_C <= n_l + ... + n_N`.
    pub fn ell_index(&self) -> usize {
        let mut suffix = 0u64;
        for (idx, &n) in self.block_lengths.iter().enumerate().rev() {
            suffix += n;
            if suffix as f64 >= self.info_bits {
                return idx + 1;
            }
        }
        1
    }

    fn check_pattern(&self, pattern: &ErasurePattern) -> Result<()> {
        if pattern.len() != self.n_blocks() {
            return Err(OffloadError::InvalidParameter("pattern length does not match the block count".into()));
        }
        Ok(())
    }

    /// True when the received bits fall short of the threshold.
    pub fn is_outage(&self, pattern: &ErasurePattern) -> Result<bool> {
        self.check_pattern(pattern)?;
        let received: u64 = (0..self.n_blocks()).filter(|&i| !pattern.erased(i)).map(|i| self.block_lengths[i]).sum();
        Ok((received as f64) < self.info_bits)
    }

    pub fn pattern_probability(&self, pattern: &ErasurePattern) -> Result<f64> {
        self.check_pattern(pattern)?;
        Ok(pattern_prob(&self.erasure_probs, pattern.bits))
    }
}

fn pattern_prob(probs: &[f64], erased: u32) -> f64 {
    probs.iter().enumerate().map(|(i, p)| if erased >> i & 1 == 1 { *p } else { 1.0 - p }).product()
}

/// Erased blocks as a bit set (bit `i` set = block `i` erased).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErasurePattern {
    bits: u32,
    len: usize,
}

impl ErasurePattern {
    pub fn new(bits: u32, len: usize) -> Self {
        assert!(len <= 32, "at most 32 blocks");
        let mask = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        Self { bits: bits & mask, len }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let bits = flags.iter().enumerate().fold(0u32, |acc, (i, e)| acc | (u32::from(*e) << i));
        Self::new(bits, flags.len())
    }

    pub fn erased(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn erased_count(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

/// Exact outage probability by depth-first enumeration of erasure patterns.
///
/// Subtrees are cut once the received bits reach the threshold (never an
/// outage) or once even receiving every remaining block falls short (always
/// an outage).
pub fn exact_outage(spec: &BlockCodeSpec) -> Result<f64> {
    let n = spec.n_blocks();
    if n > MAX_OUTAGE_BLOCKS {
        return Err(OffloadError::TooManyBlocks(n));
    }
    let lengths = &spec.block_lengths;
    let probs = &spec.erasure_probs;
    let mut remaining = vec![0u64; n + 1];
    for i in (0..n).rev() {
        remaining[i] = remaining[i + 1] + lengths[i];
    }
    fn walk(i: usize, received: u64, prob: f64, lengths: &[u64], probs: &[f64], remaining: &[u64], thr: f64) -> f64 {
        if received as f64 >= thr || prob == 0.0 {
            return 0.0;
        }
        if ((received + remaining[i]) as f64) < thr {
            return prob;
        }
        walk(i + 1, received + lengths[i], prob * (1.0 - probs[i]), lengths, probs, remaining, thr)
            + walk(i + 1, received, prob * probs[i], lengths, probs, remaining, thr)
    }
    Ok(walk(0, 0, 1.0, lengths, probs, &remaining, spec.info_bits))
}

/// Lower and upper bounds on the outage probability from the block ordering.
pub fn outage_bounds(spec: &BlockCodeSpec) -> (f64, f64) {
    let n = spec.n_blocks();
    let p = &spec.erasure_probs;
    let j = spec.j_index();
    let ell = spec.ell_index();
    let choose = |n: usize, k: usize| -> f64 {
        let k = k.min(n - k);
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    // u received blocks: least likely set is the u worst links, most likely the u best.
    let lower = (0..=j)
        .map(|u| {
            let erased: f64 = p[..n - u].iter().product();
            let received: f64 = p[n - u..].iter().map(|x| 1.0 - x).product();
            choose(n, u) * erased * received
        })
        .sum();
    let upper = (0..=n - ell)
        .map(|u| {
            let received: f64 = p[..u].iter().map(|x| 1.0 - x).product();
            let erased: f64 = p[u..].iter().product();
            choose(n, u) * received * erased
        })
        .sum();
    (lower, upper)
}

/// Upper bound on block diversity for the spec's block profile and rate.
pub fn singleton_bound(spec: &BlockCodeSpec) -> usize {
    let n = spec.n_blocks();
    let ell = spec.ell_index();
    let tail: u64 = spec.block_lengths[ell - 1..].iter().sum();
    let count = (n - ell + 1) as u64;
    // floor(1 + N - thr/M) with M = tail/count, exactly when thr is integral.
    let thr = spec.info_bits;
    let value = if thr.fract() == 0.0 && thr < 2f64.powi(62) {
        let num = tail as i128 * (n as i128 + 1) - thr as i128 * count as i128;
        num.div_euclid(tail as i128) as f64
    } else {
        (1.0 + n as f64 - thr * count as f64 / tail as f64).floor()
    };
    value.clamp(1.0, n as f64) as usize
}

/// `1 - prod_{i <= N} (1 - P_i)`: some uncoded block is lost.
pub fn uncoded_outage(probs: &[f64], n_links: usize) -> Result<f64> {
    if n_links == 0 || n_links > probs.len() {
        return Err(OffloadError::InvalidParameter(format!(
            "link count {n_links} outside 1..={}",
            probs.len()
        )));
    }
    Ok(1.0 - probs[..n_links].iter().map(|p| 1.0 - p).product::<f64>())
}

/// Binary linear code with rows packed into `u128` (column `j` = bit `j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    k: usize,
    n_c: usize,
    rows: Vec<u128>,
    block_lengths: Vec<usize>,
    block_masks: Vec<u128>,
}

fn gf2_rank(rows: impl IntoIterator<Item = u128>) -> usize {
    let mut basis = [0u128; 128];
    let mut rank = 0;
    for mut r in rows {
        while r != 0 {
            let top = 127 - r.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = r;
                rank += 1;
                break;
            }
            r ^= basis[top];
        }
    }
    rank
}

impl LinearCode {
    pub fn new(rows: Vec<u128>, n_c: usize, block_lengths: Vec<usize>) -> Result<Self> {
        if n_c == 0 || n_c > 128 {
            return Err(OffloadError::CodeTooLarge(format!("length {n_c} outside 1..=128")));
        }
        if block_lengths.iter().sum::<usize>() != n_c || block_lengths.contains(&0) {
            return Err(OffloadError::InvalidParameter("block lengths must be positive and sum to n_c".into()));
        }
        let full = if n_c == 128 { u128::MAX } else { (1u128 << n_c) - 1 };
        if rows.iter().any(|r| r & !full != 0) {
            return Err(OffloadError::InvalidParameter("generator row wider than n_c".into()));
        }
        let k = rows.len();
        if k == 0 || gf2_rank(rows.iter().copied()) != k {
            return Err(OffloadError::InvalidParameter("generator must have full row rank".into()));
        }
        let mut block_masks = Vec::with_capacity(block_lengths.len());
        let mut start = 0;
        for &len in &block_lengths {
            let m = if len == 128 { u128::MAX } else { ((1u128 << len) - 1) << start };
            block_masks.push(m);
            start += len;
        }
        Ok(Self { k, n_c, rows, block_lengths, block_masks })
    }

    /// Parses `"k n_c N"`, then the `N` block lengths, then `k` rows of 0/1.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| OffloadError::InvalidParameter(format!("generator file: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing header"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("header must be three integers")))
            .collect::<Result<_>>()?;
        let [k, n_c, n_blocks] = header[..] else { return Err(bad("header must be three integers")) };
        let blocks: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing block lengths"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("block lengths must be integers")))
            .collect::<Result<_>>()?;
        if blocks.len() != n_blocks {
            return Err(bad("block count does not match header"));
        }
        if n_c > 128 {
            return Err(OffloadError::CodeTooLarge(format!("length {n_c} outside 1..=128")));
        }
        let mut rows = Vec::with_capacity(k);
        for line in lines.by_ref().take(k) {
            let bits: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if bits.len() != n_c || bits.chars().any(|c| c != '0' && c != '1') {
                return Err(bad("each row must hold n_c characters 0/1"));
            }
            rows.push(bits.chars().enumerate().fold(0u128, |acc, (j, c)| acc | (u128::from(c == '1') << j)));
        }
        if rows.len() != k {
            return Err(bad("fewer generator rows than k"));
        }
        Self::new(rows, n_c, blocks)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.k, self.n_c, self.block_lengths.len());
        let lens: Vec<String> = self.block_lengths.iter().map(|b| b.to_string()).collect();
        out.push_str(&lens.join(" "));
        out.push('\n');
        for r in &self.rows {
            for j in 0..self.n_c {
                out.push(if r >> j & 1 == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_blocks(&self) -> usize {
        self.block_lengths.len()
    }

    pub fn block_lengths(&self) -> &[usize] {
        &self.block_lengths
    }

    pub fn rows(&self) -> &[u128] {
        &self.rows
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n_c as f64
    }

    /// Block spec with this code's lengths and rate. The lengths must be
    /// non-increasing and the probabilities non-decreasing.
    pub fn induced_spec(&self, probs: &[f64]) -> Result<BlockCodeSpec> {
        BlockCodeSpec::from_info_bits(
            self.block_lengths.iter().map(|b| *b as u64).collect(),
            probs.to_vec(),
            self.k as f64,
        )
    }

    /// `log2 |C(e)|`: codewords that vanish on every received block.
    pub fn erased_dimension(&self, pattern: &ErasurePattern) -> usize {
        let received = (0..self.n_blocks())
            .filter(|&i| !pattern.erased(i))
            .fold(0u128, |acc, i| acc | self.block_masks[i]);
        self.k - gf2_rank(self.rows.iter().map(|r| r & received))
    }

    fn check_probs(&self, probs: &[f64]) -> Result<()> {
        if self.n_blocks() > MAX_PATTERN_BLOCKS || self.k > MAX_CODE_DIMENSION {
            return Err(OffloadError::CodeTooLarge(format!(
                "{} blocks, dimension {} (limits {MAX_PATTERN_BLOCKS}, {MAX_CODE_DIMENSION})",
                self.n_blocks(),
                self.k
            )));
        }
        if probs.len() != self.n_blocks() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(OffloadError::InvalidParameter("need one probability in [0, 1] per block".into()));
        }
        Ok(())
    }

    fn pattern_sum(&self, probs: &[f64], f: impl Fn(usize) -> f64) -> Result<f64> {
        self.check_probs(probs)?;
        let n = self.n_blocks();
        Ok((0..1u32 << n)
            .map(|bits| {
                let e = ErasurePattern::new(bits, n);
                let pr = pattern_prob(probs, bits);
                if pr == 0.0 {
                    0.0
                } else {
                    pr * f(self.erased_dimension(&e))
                }
            })
            .sum())
    }

    /// Mean of `1 - 1/|C(e)|` over erasure patterns (ties broken uniformly).
    pub fn word_error_probability(&self, probs: &[f64]) -> Result<f64> {
        self.pattern_sum(probs, |dim| 1.0 - (-(dim as f64)).exp2())
    }

    /// Probability that the received blocks leave more than one candidate.
    pub fn decoding_failure_probability(&self, probs: &[f64]) -> Result<f64> {
        self.pattern_sum(probs, |dim| if dim > 0 { 1.0 } else { 0.0 })
    }

    /// Minimum number of nonzero blocks over nonzero codewords.
    pub fn block_diversity(&self) -> Result<usize> {
        if self.k > MAX_CODE_DIMENSION {
            return Err(OffloadError::CodeTooLarge(format!("dimension {} above {MAX_CODE_DIMENSION}", self.k)));
        }
        let mut best = self.n_blocks();
        let mut word = 0u128;
        // Gray-code walk: one row toggles per step.
        for step in 1u64..(1u64 << self.k) {
            word ^= self.rows[step.trailing_zeros() as usize];
            let touched = self.block_masks.iter().filter(|m| word & **m != 0).count();
            best = best.min(touched);
            if best == 1 {
                break;
            }
        }
        Ok(best)
    }
}

/// Uncoded offloading over the largest link count meeting the outage target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncodedPlan {
    pub n_star: usize,
    pub links: usize,
    pub outage: f64,
    pub allocation: AllocationPlan,
}

pub fn plan_uncoded(gains: &ChannelSet, probs: &[f64], rate: f64, bits: u64, target: f64) -> Result<UncodedPlan> {
    check_alignment(gains, probs)?;
    let n_star = optimal_link_count(gains, rate);
    let mut links = 0;
    let mut outage = f64::NAN;
    for n in (1..=n_star).rev() {
        let o = uncoded_outage(probs, n)?;
        if o <= target {
            links = n;
            outage = o;
            break;
        }
    }
    if links == 0 {
        return Err(OffloadError::OutageUnreachable { outage: probs[0], target });
    }
    let allocation = allocate_rate(&gains.prefix(links), rate, bits)?;
    Ok(UncodedPlan { n_star, links, outage, allocation })
}

fn check_alignment(gains: &ChannelSet, probs: &[f64]) -> Result<()> {
    if gains.is_empty() || probs.len() != gains.len() {
        return Err(OffloadError::InvalidParameter("need one blocking probability per link".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || probs.windows(2).any(|w| w[0] > w[1]) {
        return Err(OffloadError::InvalidParameter("blocking probabilities must be non-decreasing in [0, 1]".into()));
    }
    Ok(())
}

/// Coded offloading at the largest grid code rate meeting the outage target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedPlan {
    pub code_rate: f64,
    /// `R_min / R_C`.
    pub coded_rate: f64,
    pub n_star_coded: usize,
    pub outage: f64,
    pub allocation: AllocationPlan,
}

impl CodedPlan {
    pub fn total_power(&self) -> f64 {
        self.allocation.total_power
    }
}

pub fn plan_coded(gains: &ChannelSet, probs: &[f64], rate: f64, bits: u64, target: f64, step: f64) -> Result<CodedPlan> {
    check_alignment(gains, probs)?;
    if !(step > 0.0 && step <= 0.5) {
        return Err(OffloadError::InvalidParameter(format!("rate grid step must lie in (0, 0.5], got {step}")));
    }
    if bits == 0 {
        return Err(OffloadError::InvalidParameter("payload must be at least one bit".into()));
    }
    let mut k = 0u64;
    loop {
        let code_rate = 1.0 - k as f64 * step;
        if code_rate <= 1e-12 {
            return Err(OffloadError::NoFeasibleRate { target });
        }
        let coded_rate = rate / code_rate;
        let n_star_coded = optimal_link_count(gains, coded_rate);
        let coded_bits = ((bits as f64 / code_rate).round() as u64).max(bits);
        let allocation = allocate_rate(&gains.prefix(n_star_coded), coded_rate, coded_bits)?;
        let spec = BlockCodeSpec::from_info_bits(
            allocation.bits.clone(),
            probs[..n_star_coded].to_vec(),
            bits as f64,
        )?;
        let outage = exact_outage(&spec)?;
        if outage <= target {
            return Ok(CodedPlan { code_rate, coded_rate, n_star_coded, outage, allocation });
        }
        k += 1;
    }
}
