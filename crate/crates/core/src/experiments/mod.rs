//! Reproducible table and figure experiments emitting CSV.
//!
//! Every experiment is a pure function of its configuration. Trials are
//! mapped in parallel but collected in trial order and reduced sequentially,
//! so output bytes do not depend on the worker count.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use config::{fmt_f64, to_per_km2, validate_config, ConfigError, ConfigIssue, ExperimentConfig, ExperimentId, Overrides, Params};

use crate::blocking::{blocking_probs_from_distances, BlockageEnv};
use crate::channel::{single_link_min_power, watts_to_dbm, ChannelSet, FriisParams};
use crate::erasure::{exact_outage, plan_coded, plan_uncoded, BlockCodeSpec};
use crate::error::OffloadError;
use crate::geometry::{
    lambda_epsilon_delta, m_epsilon, n_star_pmf_analytic, sample_uniform, total_variation, NStarMonteCarlo, Region,
};
use crate::multilink::{allocate_rate, optimal_link_count, two_link_allocate};
use crate::overprovision::solve_waterfill;
use crate::rng::{StreamFamily, RNG_NAME};

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentError {
    Config(ConfigError),
    Numeric(OffloadError),
    Io(String),
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "configuration error:\n{e}"),
            Self::Numeric(e) => write!(f, "numeric failure: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<OffloadError> for ExperimentError {
    fn from(e: OffloadError) -> Self {
        Self::Numeric(e)
    }
}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl ExperimentError {
    /// Process exit code: 2 for configuration, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

type Outcome<T> = std::result::Result<T, ExperimentError>;

/// A finished CSV table plus `#` metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvArtifact {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub metadata: Vec<(String, String)>,
}

impl CsvArtifact {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), metadata: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let mut out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out
    }
}

/// Writes through a temporary sibling file and a rename, so a failed run
/// never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Runs one experiment and returns its table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Io(e.to_string()))?;
    let mut art = pool.install(|| match cfg.id {
        ExperimentId::Table1 => table1(cfg),
        ExperimentId::Table2 => table2(cfg),
        ExperimentId::Fig3 => fig3(cfg),
        ExperimentId::Fig4 => fig4(cfg),
        ExperimentId::Fig5 | ExperimentId::Fig6 => fig5_6(cfg),
        ExperimentId::Fig7 => fig7(cfg),
        ExperimentId::Fig8 => fig8(cfg),
        ExperimentId::Fig9 => fig9(cfg),
        ExperimentId::Fig10 => fig10(cfg),
        ExperimentId::Fig11 => fig11(cfg),
    })?;
    let mut meta = vec![
        ("experiment".to_string(), cfg.id.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        (
            "trials".to_string(),
            if cfg.id.default_trials().is_some() { cfg.trials.to_string() } else { "n/a".to_string() },
        ),
        ("version".to_string(), format!("mmwave-offload {}", env!("CARGO_PKG_VERSION"))),
        ("rng".to_string(), RNG_NAME.to_string()),
    ];
    meta.extend(cfg.params.echo(cfg.id).into_iter().map(|(k, v)| (format!("param.{k}"), v)));
    meta.append(&mut art.metadata);
    art.metadata = meta;
    Ok(art)
}

/// Runs the experiment and writes the CSV to `cfg.out` if set.
pub fn run_and_write(cfg: &ExperimentConfig) -> Outcome<String> {
    let text = run_experiment(cfg)?.to_csv();
    if let Some(path) = &cfg.out {
        write_atomic(path, &text).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(text)
}

fn friis(p: &Params) -> Outcome<FriisParams> {
    Ok(FriisParams::free_space(p.rx_gain, p.tx_gain, p.wavelength_m, p.noise_dbm)?)
}

/// Trial results in trial order.
fn par_trials<T: Send>(trials: u64, f: impl Fn(u64) -> Result<T, OffloadError> + Sync + Send) -> Outcome<Vec<T>> {
    Ok((0..trials).into_par_iter().map(f).collect::<Result<Vec<T>, OffloadError>>()?)
}

struct Stats {
    mean: f64,
    std: f64,
    n: usize,
}

fn stats(values: impl IntoIterator<Item = f64>) -> Stats {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len();
    if n == 0 {
        return Stats { mean: f64::NAN, std: f64::NAN, n };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    Stats { mean, std, n }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn dbm(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        f(watts_to_dbm(x))
    }
}

/// `n` APs uniform in the configured square, for trial `t`.
fn square_deployment(p: &Params, streams: &StreamFamily, trial: u64, n: usize) -> crate::geometry::Deployment {
    let mut rng = streams.trial(trial);
    sample_uniform(n, Region::Square { side: p.region_side_m }, &mut rng)
}

fn table1(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let mut header = vec!["r_min".to_string()];
    header.extend(p.epsilons.iter().map(|e| format!("m_eps_{}", f(*e))));
    let mut art = CsvArtifact { header, rows: Vec::new(), metadata: Vec::new() };
    for &r in &p.rates {
        let mut row = vec![f(r)];
        for &e in &p.epsilons {
            row.push(m_epsilon(r, p.alpha, e)?.to_string());
        }
        art.push(row);
    }
    Ok(art)
}

fn table2(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let mut art = CsvArtifact::new(&["r_min", "m_eps", "lambda_per_km2", "lambda_floor_per_km2"]);
    for &r in &p.rates {
        let m = m_epsilon(r, p.alpha, p.epsilon)?;
        let lam = lambda_epsilon_delta(r, p.alpha, p.epsilon, p.delta, p.radius_m)?;
        art.push(vec![f(r), m.to_string(), f(lam), f(lam.floor())]);
    }
    Ok(art)
}

fn fig3(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let streams = StreamFamily::new(cfg.seed, cfg.id.stream_key());
    // Same two-AP deployments for every rate.
    let gains = par_trials(cfg.trials, |t| {
        let d = square_deployment(p, &streams, t, 2).sorted_distances();
        ChannelSet::from_distances(&params, d)
    })?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "trials",
        "mean_power_one_link_w",
        "mean_power_two_links_w",
        "mean_power_one_link_dbm",
        "mean_power_two_links_dbm",
        "std_power_one_link_w",
        "std_power_two_links_w",
        "fraction_two_links_used",
    ]);
    for &r in &p.rates {
        let per: Vec<(f64, f64, bool)> = gains
            .par_iter()
            .map(|g| {
                let (a1, a2) = (g.gains()[0], g.gains()[1]);
                let plan = two_link_allocate(a1, a2, r, p.bits)?;
                Ok((single_link_min_power(a1, r), plan.total_power, plan.links_used == 2))
            })
            .collect::<Result<_, OffloadError>>()?;
        let one = stats(per.iter().map(|x| x.0));
        let two = stats(per.iter().map(|x| x.1));
        let frac = per.iter().filter(|x| x.2).count() as f64 / per.len() as f64;
        art.push(vec![
            f(r),
            cfg.trials.to_string(),
            f(one.mean),
            f(two.mean),
            dbm(one.mean),
            dbm(two.mean),
            f(one.std),
            f(two.std),
            f(frac),
        ]);
    }
    art.metadata.push(("averaging".into(), "power averaged in W, dBm column is the dBm of the mean".into()));
    Ok(art)
}

fn fig4(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let streams = StreamFamily::new(cfg.seed, cfg.id.stream_key());
    let deps = par_trials(cfg.trials, |t| Ok(square_deployment(p, &streams, t, p.n_aps)))?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "n_available",
        "trials",
        "mean_power_w",
        "mean_power_dbm",
        "std_power_w",
        "mean_links_used",
    ]);
    for &r in &p.rates {
        for n in 1..=p.n_aps {
            // Nested availability: the first n APs in placement order.
            let per: Vec<(f64, usize)> = deps
                .par_iter()
                .map(|dep| {
                    let g = ChannelSet::from_distances(&params, dep.prefix_distances(n))?;
                    let plan = allocate_rate(&g, r, p.bits)?;
                    Ok((plan.total_power, plan.links_used))
                })
                .collect::<Result<_, OffloadError>>()?;
            let s = stats(per.iter().map(|x| x.0));
            let links = per.iter().map(|x| x.1 as f64).sum::<f64>() / per.len() as f64;
            art.push(vec![f(r), n.to_string(), cfg.trials.to_string(), f(s.mean), dbm(s.mean), f(s.std), f(links)]);
        }
    }
    Ok(art)
}

fn fig5_6(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let root = StreamFamily::new(cfg.seed, cfg.id.stream_key());
    let mut art = CsvArtifact::new(&[
        "r_min",
        "lambda_per_km2",
        "N",
        "analytic_pmf",
        "empirical_pmf",
        "trials",
        "seed",
        "count",
        "tv_distance",
        "truncated_trials",
        "nesting_violations",
    ]);
    let mut point = 0u64;
    for &r in &p.rates {
        for &lam in &p.lambdas {
            let mc = NStarMonteCarlo::new(r, p.alpha, lam, cfg.trials);
            let emp = mc.run(root.child(point))?;
            point += 1;
            let n_max = emp.counts.len().max(m_epsilon(r, p.alpha, 1e-6)?);
            let theory = n_star_pmf_analytic(r, p.alpha, n_max);
            let tv = total_variation(&emp.pmf(), &theory.pmf);
            for n in 1..=n_max {
                let count = emp.counts.get(n - 1).copied().unwrap_or(0);
                art.push(vec![
                    f(r),
                    f(to_per_km2(lam)),
                    n.to_string(),
                    f(theory.prob(n)),
                    f(emp.prob(n)),
                    cfg.trials.to_string(),
                    cfg.seed.to_string(),
                    count.to_string(),
                    f(tv),
                    emp.truncated.to_string(),
                    emp.nesting_violations.to_string(),
                ]);
            }
        }
    }
    art.metadata.push((
        "analytic_pmf".into(),
        "closed form for N = 1, 2; shifted Poisson conjectured, N >= 3".into(),
    ));
    art.metadata.push(("window".into(), "PPP in a disk sized so the cap AP lies outside w.p. < 1e-4".into()));
    Ok(art)
}

/// Gains and blocking distances for the first `n` APs of a deployment.
fn nested_links(dep: &crate::geometry::Deployment, params: &FriisParams, n: usize) -> Result<(ChannelSet, Vec<f64>), OffloadError> {
    let d = dep.prefix_distances(n);
    Ok((ChannelSet::from_distances(params, d.clone())?, d))
}

fn fig7(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let streams = StreamFamily::new(cfg.seed, cfg.id.stream_key());
    let deps = par_trials(cfg.trials, |t| Ok(square_deployment(p, &streams, t, p.n_aps)))?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "mu_per_km2",
        "n_links",
        "trials",
        "mean_power_w",
        "mean_power_dbm",
        "std_power_w",
    ]);
    for &r in &p.rates {
        for &mu in &p.mus {
            let env = BlockageEnv::new(mu, p.mean_w_m, p.mean_x_m)?;
            for n in 1..=p.n_aps {
                let powers: Vec<f64> = deps
                    .par_iter()
                    .map(|dep| {
                        let (g, d) = nested_links(dep, &params, n)?;
                        let probs = blocking_probs_from_distances(&env, &d);
                        Ok(solve_waterfill(&g, &probs, r, None)?.average_power)
                    })
                    .collect::<Result<_, OffloadError>>()?;
                let s = stats(powers);
                art.push(vec![
                    f(r),
                    f(to_per_km2(mu)),
                    n.to_string(),
                    cfg.trials.to_string(),
                    f(s.mean),
                    dbm(s.mean),
                    f(s.std),
                ]);
            }
        }
    }
    Ok(art)
}

/// Block spec of the power-optimal coded plan at code rate `rc`.
pub fn coded_spec(gains: &ChannelSet, probs: &[f64], rate: f64, bits: u64, rc: f64) -> Result<(BlockCodeSpec, f64, usize), OffloadError> {
    let coded_rate = rate / rc;
    let n = optimal_link_count(gains, coded_rate);
    let coded_bits = ((bits as f64 / rc).round() as u64).max(bits);
    let plan = allocate_rate(&gains.prefix(n), coded_rate, coded_bits)?;
    let spec = BlockCodeSpec::from_info_bits(plan.bits, probs[..n].to_vec(), bits as f64)?;
    Ok((spec, plan.total_power, n))
}

fn fig8(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let streams = StreamFamily::new(cfg.seed, cfg.id.stream_key());
    let deps = par_trials(cfg.trials, |t| {
        let dep = square_deployment(p, &streams, t, p.n_aps);
        let d = dep.sorted_distances();
        Ok((ChannelSet::from_distances(&params, d.clone())?, d))
    })?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "mu_per_km2",
        "code_rate",
        "trials",
        "mean_outage",
        "std_outage",
        "mean_links_used",
    ]);
    for &r in &p.rates {
        for &mu in &p.mus {
            let env = BlockageEnv::new(mu, p.mean_w_m, p.mean_x_m)?;
            for &rc in &p.code_rates {
                let per: Vec<(f64, usize)> = deps
                    .par_iter()
                    .map(|(g, d)| {
                        let probs = blocking_probs_from_distances(&env, d);
                        let (spec, _, n) = coded_spec(g, &probs, r, p.bits, rc)?;
                        Ok((exact_outage(&spec)?, n))
                    })
                    .collect::<Result<_, OffloadError>>()?;
                let s = stats(per.iter().map(|x| x.0));
                let links = per.iter().map(|x| x.1 as f64).sum::<f64>() / per.len() as f64;
                art.push(vec![
                    f(r),
                    f(to_per_km2(mu)),
                    f(rc),
                    cfg.trials.to_string(),
                    f(s.mean),
                    f(s.std),
                    f(links),
                ]);
            }
        }
    }
    Ok(art)
}

fn deployments_with_distances(cfg: &ExperimentConfig, params: &FriisParams) -> Outcome<Vec<(ChannelSet, Vec<f64>)>> {
    let p = &cfg.params;
    let streams = StreamFamily::new(cfg.seed, cfg.id.stream_key());
    par_trials(cfg.trials, |t| {
        let d = square_deployment(p, &streams, t, p.n_aps).sorted_distances();
        Ok((ChannelSet::from_distances(params, d.clone())?, d))
    })
}

fn fig9(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let deps = deployments_with_distances(cfg, &params)?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "mu_per_km2",
        "target_outage",
        "trials",
        "feasible_trials",
        "mean_max_code_rate",
        "std_max_code_rate",
    ]);
    for &r in &p.rates {
        for &mu in &p.mus {
            let env = BlockageEnv::new(mu, p.mean_w_m, p.mean_x_m)?;
            for &target in &p.targets {
                let per: Vec<Option<f64>> = deps
                    .par_iter()
                    .map(|(g, d)| {
                        let probs = blocking_probs_from_distances(&env, d);
                        match plan_coded(g, &probs, r, p.bits, target, p.code_rate_step) {
                            Ok(plan) => Ok(Some(plan.code_rate)),
                            Err(OffloadError::NoFeasibleRate { .. }) => Ok(None),
                            Err(e) => Err(e),
                        }
                    })
                    .collect::<Result<_, OffloadError>>()?;
                let s = stats(per.iter().flatten().copied());
                art.push(vec![
                    f(r),
                    f(to_per_km2(mu)),
                    f(target),
                    cfg.trials.to_string(),
                    s.n.to_string(),
                    f(s.mean),
                    f(s.std),
                ]);
            }
        }
    }
    Ok(art)
}

fn fig10(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let deps = deployments_with_distances(cfg, &params)?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "mu_per_km2",
        "target_outage",
        "trials",
        "coded_feasible",
        "mean_coded_power_w",
        "mean_coded_power_dbm",
        "mean_code_rate",
        "uncoded_feasible",
        "mean_uncoded_power_w",
        "mean_uncoded_power_dbm",
        "mean_uncoded_links",
    ]);
    for &r in &p.rates {
        for &mu in &p.mus {
            let env = BlockageEnv::new(mu, p.mean_w_m, p.mean_x_m)?;
            for &target in &p.targets {
                type Row = (Option<(f64, f64)>, Option<(f64, usize)>);
                let per: Vec<Row> = deps
                    .par_iter()
                    .map(|(g, d)| {
                        let probs = blocking_probs_from_distances(&env, d);
                        let coded = match plan_coded(g, &probs, r, p.bits, target, p.code_rate_step) {
                            Ok(c) => Some((c.total_power(), c.code_rate)),
                            Err(OffloadError::NoFeasibleRate { .. }) => None,
                            Err(e) => return Err(e),
                        };
                        let uncoded = match plan_uncoded(g, &probs, r, p.bits, target) {
                            Ok(u) => Some((u.allocation.total_power, u.links)),
                            Err(OffloadError::OutageUnreachable { .. }) => None,
                            Err(e) => return Err(e),
                        };
                        Ok((coded, uncoded))
                    })
                    .collect::<Result<_, OffloadError>>()?;
                let cp = stats(per.iter().filter_map(|x| x.0.map(|c| c.0)));
                let cr = stats(per.iter().filter_map(|x| x.0.map(|c| c.1)));
                let up = stats(per.iter().filter_map(|x| x.1.map(|u| u.0)));
                let ul = stats(per.iter().filter_map(|x| x.1.map(|u| u.1 as f64)));
                art.push(vec![
                    f(r),
                    f(to_per_km2(mu)),
                    f(target),
                    cfg.trials.to_string(),
                    cp.n.to_string(),
                    f(cp.mean),
                    dbm(cp.mean),
                    f(cr.mean),
                    up.n.to_string(),
                    f(up.mean),
                    dbm(up.mean),
                    f(ul.mean),
                ]);
            }
        }
    }
    art.metadata.push(("averaging".into(), "means over deployments where the strategy meets the target".into()));
    Ok(art)
}

fn fig11(cfg: &ExperimentConfig) -> Outcome<CsvArtifact> {
    let p = &cfg.params;
    let params = friis(p)?;
    let deps = deployments_with_distances(cfg, &params)?;
    let mut art = CsvArtifact::new(&[
        "r_min",
        "mu_per_km2",
        "code_rate",
        "trials",
        "mean_outage",
        "mean_power_w",
        "mean_power_dbm",
        "best_link_outage",
        "best_link_power_w",
        "best_link_power_dbm",
    ]);
    for &r in &p.rates {
        for &mu in &p.mus {
            let env = BlockageEnv::new(mu, p.mean_w_m, p.mean_x_m)?;
            // The least-outage uncoded strategy: everything on the best link.
            let best_outage = stats(deps.iter().map(|(_, d)| blocking_probs_from_distances(&env, &d[..1])[0]));
            let best_power = stats(deps.iter().map(|(g, _)| single_link_min_power(g.gains()[0], r)));
            for &rc in &p.code_rates {
                let per: Vec<(f64, f64)> = deps
                    .par_iter()
                    .map(|(g, d)| {
                        let probs = blocking_probs_from_distances(&env, d);
                        let (spec, power, _) = coded_spec(g, &probs, r, p.bits, rc)?;
                        Ok((exact_outage(&spec)?, power))
                    })
                    .collect::<Result<_, OffloadError>>()?;
                let o = stats(per.iter().map(|x| x.0));
                let w = stats(per.iter().map(|x| x.1));
                art.push(vec![
                    f(r),
                    f(to_per_km2(mu)),
                    f(rc),
                    cfg.trials.to_string(),
                    f(o.mean),
                    f(w.mean),
                    dbm(w.mean),
                    f(best_outage.mean),
                    f(best_power.mean),
                    dbm(best_power.mean),
                ]);
            }
        }
    }
    Ok(art)
}
