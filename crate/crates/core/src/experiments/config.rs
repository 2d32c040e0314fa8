//! TOML experiment configuration with exhaustive validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::geometry::PER_KM2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    Table1,
    Table2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        Self::Table1,
        Self::Table2,
        Self::Fig3,
        Self::Fig4,
        Self::Fig5,
        Self::Fig6,
        Self::Fig7,
        Self::Fig8,
        Self::Fig9,
        Self::Fig10,
        Self::Fig11,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Table1 => "table1",
            Self::Table2 => "table2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
            Self::Fig7 => "fig7",
            Self::Fig8 => "fig8",
            Self::Fig9 => "fig9",
            Self::Fig10 => "fig10",
            Self::Fig11 => "fig11",
        }
    }

    /// Stream key so different experiments never share random numbers.
    pub(crate) fn stream_key(&self) -> u64 {
        Self::ALL.iter().position(|e| e == self).unwrap() as u64 + 0x6f66_666c_6f61_6400
    }

    /// Desk-scale and full-scale trial counts; `None` for deterministic tables.
    pub fn default_trials(&self) -> Option<(u64, u64)> {
        match self {
            Self::Table1 | Self::Table2 => None,
            Self::Fig3 => Some((10_000, 100_000)),
            Self::Fig4 => Some((10_000, 10_000)),
            Self::Fig5 | Self::Fig6 => Some((100_000, 10_000_000)),
            Self::Fig7 => Some((2_000, 10_000)),
            Self::Fig8 | Self::Fig9 | Self::Fig10 | Self::Fig11 => Some((1_000, 10_000)),
        }
    }

    /// Keys accepted for this experiment besides the common ones.
    fn keys(&self) -> &'static [&'static str] {
        match self {
            Self::Table1 => &["rates", "alpha", "epsilons"],
            Self::Table2 => &["rates", "alpha", "epsilon", "delta", "radius_m"],
            Self::Fig3 => &["rates", "region_side_m", "rx_gain", "tx_gain", "wavelength_m", "noise_dbm"],
            Self::Fig4 => &["rates", "region_side_m", "n_aps", "rx_gain", "tx_gain", "wavelength_m", "noise_dbm"],
            Self::Fig5 | Self::Fig6 => &["rates", "alpha", "lambda_per_km2"],
            Self::Fig7 => &[
                "rates", "region_side_m", "n_aps", "mu_per_km2", "mean_w_m", "mean_x_m", "rx_gain", "tx_gain",
                "wavelength_m", "noise_dbm",
            ],
            Self::Fig8 => &[
                "rates", "region_side_m", "n_aps", "mu_per_km2", "mean_w_m", "mean_x_m", "code_rates", "bits",
                "rx_gain", "tx_gain", "wavelength_m", "noise_dbm",
            ],
            Self::Fig9 => &[
                "rates", "region_side_m", "n_aps", "mu_per_km2", "mean_w_m", "mean_x_m", "targets",
                "code_rate_step", "bits", "rx_gain", "tx_gain", "wavelength_m", "noise_dbm",
            ],
            Self::Fig10 => &[
                "rates", "region_side_m", "n_aps", "mu_per_km2", "mean_w_m", "mean_x_m", "targets",
                "code_rate_step", "bits", "rx_gain", "tx_gain", "wavelength_m", "noise_dbm",
            ],
            Self::Fig11 => &[
                "rates", "region_side_m", "n_aps", "mu_per_km2", "mean_w_m", "mean_x_m", "code_rates", "bits",
                "rx_gain", "tx_gain", "wavelength_m", "noise_dbm",
            ],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .iter()
            .find(|e| e.as_str() == s)
            .copied()
            .ok_or_else(|| ConfigError::single("experiment", format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

/// Every problem found in a configuration, not just the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn single(key: &str, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { key: key.into(), message: message.into() }] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", issue.key, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Model and sweep parameters. Densities are stored per m^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub rates: Vec<f64>,
    pub alpha: f64,
    pub epsilons: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub radius_m: f64,
    pub region_side_m: f64,
    pub n_aps: usize,
    /// AP intensities, points/m^2.
    pub lambdas: Vec<f64>,
    /// Blocker densities, blockers/m^2.
    pub mus: Vec<f64>,
    pub mean_w_m: f64,
    pub mean_x_m: f64,
    pub code_rates: Vec<f64>,
    pub code_rate_step: f64,
    pub targets: Vec<f64>,
    pub bits: u64,
    pub rx_gain: f64,
    pub tx_gain: f64,
    pub wavelength_m: f64,
    pub noise_dbm: f64,
}

fn mu_grid() -> Vec<f64> {
    (0..=12).map(|k| 25.0 * k as f64 * PER_KM2).collect()
}

impl Params {
    /// Setups of the reproduced tables and figures.
    ///
    /// Region sizes are square side lengths: 100 m for the two-link average
    /// (a 10 000 m^2 square), otherwise the quoted side.
    pub fn defaults(id: ExperimentId) -> Self {
        let base = Self {
            rates: vec![8.0],
            alpha: 2.0,
            epsilons: vec![0.1, 0.01],
            epsilon: 0.1,
            delta: 0.1,
            radius_m: 100.0,
            region_side_m: 200.0,
            n_aps: 15,
            lambdas: vec![100.0 * PER_KM2],
            mus: mu_grid(),
            mean_w_m: 2.0,
            mean_x_m: 2.0,
            code_rates: vec![1.0, 0.9, 0.75, 0.5, 0.25],
            code_rate_step: 0.01,
            targets: vec![0.05],
            bits: 10_000,
            rx_gain: 128.0,
            tx_gain: 32.0,
            wavelength_m: 0.005,
            noise_dbm: -82.96,
        };
        let table_rates = vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        match id {
            ExperimentId::Table1 | ExperimentId::Table2 => Self { rates: table_rates, ..base },
            ExperimentId::Fig3 => Self { rates: (1..=12).map(f64::from).collect(), region_side_m: 100.0, ..base },
            ExperimentId::Fig4 => Self { rates: vec![4.0, 8.0, 12.0, 16.0], n_aps: 10, ..base },
            ExperimentId::Fig5 => Self { rates: vec![2.0, 4.0, 8.0], ..base },
            ExperimentId::Fig6 => Self { lambdas: [50.0, 100.0, 200.0].map(|l| l * PER_KM2).to_vec(), ..base },
            ExperimentId::Fig7 => Self { region_side_m: 150.0, n_aps: 4, ..base },
            ExperimentId::Fig8 => Self { region_side_m: 300.0, ..base },
            ExperimentId::Fig9 => Self { region_side_m: 300.0, targets: vec![0.1, 0.05, 0.01], ..base },
            ExperimentId::Fig10 => Self { rates: vec![8.0, 16.0], mean_w_m: 1.0, ..base },
            ExperimentId::Fig11 => Self {
                region_side_m: 300.0,
                mean_w_m: 1.0,
                mus: [50.0, 100.0, 200.0].map(|m| m * PER_KM2).to_vec(),
                code_rates: (1..=20).map(|k| k as f64 * 0.05).collect(),
                ..base
            },
        }
    }

    /// Configuration echo with densities back in per-km^2 units.
    pub fn echo(&self, id: ExperimentId) -> Vec<(String, String)> {
        let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "));
        let km2 = |v: &[f64]| list(&v.iter().map(|x| to_per_km2(*x)).collect::<Vec<_>>());
        id.keys()
            .iter()
            .map(|k| {
                let v = match *k {
                    "rates" => list(&self.rates),
                    "alpha" => fmt_f64(self.alpha),
                    "epsilons" => list(&self.epsilons),
                    "epsilon" => fmt_f64(self.epsilon),
                    "delta" => fmt_f64(self.delta),
                    "radius_m" => fmt_f64(self.radius_m),
                    "region_side_m" => fmt_f64(self.region_side_m),
                    "n_aps" => self.n_aps.to_string(),
                    "lambda_per_km2" => km2(&self.lambdas),
                    "mu_per_km2" => km2(&self.mus),
                    "mean_w_m" => fmt_f64(self.mean_w_m),
                    "mean_x_m" => fmt_f64(self.mean_x_m),
                    "code_rates" => list(&self.code_rates),
                    "code_rate_step" => fmt_f64(self.code_rate_step),
                    "targets" => list(&self.targets),
                    "bits" => self.bits.to_string(),
                    "rx_gain" => fmt_f64(self.rx_gain),
                    "tx_gain" => fmt_f64(self.tx_gain),
                    "wavelength_m" => fmt_f64(self.wavelength_m),
                    "noise_dbm" => fmt_f64(self.noise_dbm),
                    other => unreachable!("unlisted key {other}"),
                };
                (k.to_string(), v)
            })
            .collect()
    }
}

/// Per-m^2 density back in per-km^2, with conversion noise rounded off.
pub fn to_per_km2(x: f64) -> f64 {
    (x / PER_KM2 * 1e9).round() / 1e9
}

/// Shortest round-trip decimal form; `NaN` becomes an empty field.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub seed: u64,
    pub trials: u64,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
    pub full: bool,
    pub out: Option<PathBuf>,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn defaults(id: ExperimentId) -> Self {
        Self {
            id,
            seed: 1,
            trials: id.default_trials().map_or(1, |t| t.0),
            workers: 1,
            full: false,
            out: None,
            params: Params::defaults(id),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub full: bool,
}

const COMMON_KEYS: &[&str] = &["experiment", "seed", "trials", "workers", "out"];

struct Collector {
    issues: Vec<ConfigIssue>,
}

impl Collector {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue { key: key.into(), message: message.into() });
    }

    fn float(&mut self, key: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.push(key, "expected a number");
                None
            }
        }
    }

    fn uint(&mut self, key: &str, v: &Value) -> Option<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(_) => {
                self.push(key, "must be non-negative");
                None
            }
            _ => {
                self.push(key, "expected an integer");
                None
            }
        }
    }

    fn floats(&mut self, key: &str, v: &Value) -> Option<Vec<f64>> {
        let Value::Array(items) = v else {
            self.push(key, "expected an array of numbers");
            return None;
        };
        if items.is_empty() {
            self.push(key, "must not be empty");
            return None;
        }
        let vals: Vec<Option<f64>> = items.iter().map(|x| self.float(key, x)).collect();
        vals.into_iter().collect()
    }

    fn check(&mut self, key: &str, ok: bool, message: &str) {
        if !ok {
            self.push(key, message);
        }
    }
}

/// Parses and validates a TOML configuration for `id`.
///
/// An `experiment` key, if present, must agree with `id`. Unknown keys and
/// keys that do not apply to the experiment are rejected.
pub fn validate_config(raw: &str, id: Option<ExperimentId>, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = raw.parse().map_err(|e: toml::de::Error| ConfigError::single("toml", e.message().to_string()))?;
    let mut c = Collector { issues: Vec::new() };

    let file_id = match table.get("experiment") {
        Some(Value::String(s)) => match s.parse::<ExperimentId>() {
            Ok(e) => Some(e),
            Err(e) => {
                c.issues.extend(e.issues);
                None
            }
        },
        Some(_) => {
            c.push("experiment", "expected a string");
            None
        }
        None => None,
    };
    let id = match (id, file_id) {
        (Some(a), Some(b)) if a != b => {
            c.push("experiment", format!("file names {b} but {a} was requested"));
            a
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            c.push("experiment", "no experiment given");
            return Err(ConfigError { issues: c.issues });
        }
    };

    let mut cfg = ExperimentConfig::defaults(id);
    let p = &mut cfg.params;
    let allowed = id.keys();
    let mut trials_set = false;
    for (key, v) in &table {
        let k = key.as_str();
        if !COMMON_KEYS.contains(&k) && !allowed.contains(&k) {
            let known = ExperimentId::ALL.iter().any(|e| e.keys().contains(&k));
            c.push(k, if known { format!("does not apply to {id}") } else { "unknown key".to_string() });
            continue;
        }
        match k {
            "experiment" => {}
            "seed" => {
                if let Some(x) = c.uint(k, v) {
                    cfg.seed = x;
                }
            }
            "trials" => {
                if let Some(x) = c.uint(k, v) {
                    c.check(k, x >= 1, "must be at least 1");
                    cfg.trials = x;
                    trials_set = true;
                }
            }
            "workers" => {
                if let Some(x) = c.uint(k, v) {
                    c.check(k, (1..=1024).contains(&x), "must lie in 1..=1024");
                    cfg.workers = x as usize;
                }
            }
            "out" => match v {
                Value::String(s) => cfg.out = Some(PathBuf::from(s)),
                _ => c.push(k, "expected a path string"),
            },
            "rates" => {
                if let Some(x) = c.floats(k, v) {
                    c.check(k, x.iter().all(|r| *r > 0.0 && *r <= 64.0), "rates must lie in (0, 64] bit/s/Hz");
                    p.rates = x;
                }
            }
            "alpha" => {
                if let Some(x) = c.float(k, v) {
                    c.check(k, x > 0.0 && x <= 10.0, "must lie in (0, 10]");
                    p.alpha = x;
                }
            }
            "epsilons" => {
                if let Some(x) = c.floats(k, v) {
                    c.check(k, x.iter().all(|e| *e > 0.0 && *e < 1.0), "values must lie in (0, 1)");
                    p.epsilons = x;
                }
            }
            "epsilon" | "delta" => {
                if let Some(x) = c.float(k, v) {
                    c.check(k, x > 0.0 && x < 1.0, "must lie in (0, 1)");
                    if k == "epsilon" {
                        p.epsilon = x;
                    } else {
                        p.delta = x;
                    }
                }
            }
            "radius_m" | "region_side_m" | "mean_w_m" | "mean_x_m" | "rx_gain" | "tx_gain" | "wavelength_m" => {
                if let Some(x) = c.float(k, v) {
                    c.check(k, x > 0.0 && x.is_finite(), "must be positive");
                    match k {
                        "radius_m" => p.radius_m = x,
                        "region_side_m" => p.region_side_m = x,
                        "mean_w_m" => p.mean_w_m = x,
                        "mean_x_m" => p.mean_x_m = x,
                        "rx_gain" => p.rx_gain = x,
                        "tx_gain" => p.tx_gain = x,
                        _ => p.wavelength_m = x,
                    }
                }
            }
            "noise_dbm" => {
                if let Some(x) = c.float(k, v) {
                    c.check(k, x.is_finite(), "must be finite");
                    p.noise_dbm = x;
                }
            }
            "n_aps" => {
                if let Some(x) = c.uint(k, v) {
                    let cap = if id == ExperimentId::Fig7 { 20 } else { 25 };
                    c.check(k, x >= 1 && x <= cap, &format!("must lie in 1..={cap}"));
                    p.n_aps = x as usize;
                }
            }
            "lambda_per_km2" => {
                if let Some(x) = c.floats(k, v) {
                    c.check(k, x.iter().all(|l| *l > 0.0 && l.is_finite()), "densities must be positive");
                    p.lambdas = x.iter().map(|l| l * PER_KM2).collect();
                }
            }
            "mu_per_km2" => {
                if let Some(x) = c.floats(k, v) {
                    c.check(k, x.iter().all(|m| *m >= 0.0 && m.is_finite()), "densities must be non-negative");
                    p.mus = x.iter().map(|m| m * PER_KM2).collect();
                }
            }
            "code_rates" => {
                if let Some(x) = c.floats(k, v) {
                    c.check(k, x.iter().all(|r| *r > 0.0 && *r <= 1.0), "code rates must lie in (0, 1]");
                    p.code_rates = x;
                }
            }
            "code_rate_step" => {
                if let Some(x) = c.float(k, v) {
                    c.check(k, x > 0.0 && x <= 0.5, "must lie in (0, 0.5]");
                    p.code_rate_step = x;
                }
            }
            "targets" => {
                if let Some(x) = c.floats(k, v) {
                    c.check(k, x.iter().all(|t| *t > 0.0 && *t <= 1.0), "outage targets must lie in (0, 1]");
                    p.targets = x;
                }
            }
            "bits" => {
                if let Some(x) = c.uint(k, v) {
                    c.check(k, x >= 1, "must be at least 1");
                    p.bits = x;
                }
            }
            _ => unreachable!(),
        }
    }

    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(w) = overrides.workers {
        c.check("workers", (1..=1024).contains(&w), "must lie in 1..=1024");
        cfg.workers = w;
    }
    if let Some(o) = &overrides.out {
        cfg.out = Some(o.clone());
    }
    cfg.full = overrides.full;
    if let Some(t) = overrides.trials {
        c.check("trials", t >= 1, "must be at least 1");
        cfg.trials = t;
    } else if overrides.full && !trials_set {
        cfg.trials = id.default_trials().map_or(1, |t| t.1);
    }
    if matches!(id, ExperimentId::Fig5 | ExperimentId::Fig6) && cfg.trials < 1000 {
        c.push("trials", "Monte Carlo pmf estimates need at least 1000 trials");
    }

    if c.issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues: c.issues })
    }
}
