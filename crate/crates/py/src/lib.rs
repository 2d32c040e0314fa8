//! Python bindings. Gains are linear 1/W, distances m, densities per km^2.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::mmwave_offload as core;
use core::experiments::{run_experiment as run, validate_config, ExperimentError, ExperimentId, Overrides};
use core::{ChannelSet, FriisParams, OffloadError};

create_exception!(mmwave_offload, OffloadNumericError, PyValueError, "Numeric or domain failure in the analysis.");
create_exception!(mmwave_offload, ConfigError, PyValueError, "Invalid experiment configuration.");

fn err(e: OffloadError) -> PyErr {
    OffloadNumericError::new_err(e.to_string())
}

fn channels(gains: Vec<f64>) -> PyResult<ChannelSet> {
    ChannelSet::from_unsorted(gains).map_err(err)
}

/// Channel gains a = G_R G_T (lambda/4 pi)^2 / (sigma^2 d^2) for each distance.
#[pyfunction]
#[pyo3(signature = (distances, rx_gain=128.0, tx_gain=32.0, wavelength=0.005, noise_dbm=-82.96))]
fn gains_from_distances(distances: Vec<f64>, rx_gain: f64, tx_gain: f64, wavelength: f64, noise_dbm: f64) -> PyResult<Vec<f64>> {
    let p = FriisParams::free_space(rx_gain, tx_gain, wavelength, noise_dbm).map_err(err)?;
    distances.into_iter().map(|d| p.gain(d).map_err(err)).collect()
}

#[pyfunction]
fn optimal_link_count(gains: Vec<f64>, rate: f64) -> PyResult<usize> {
    Ok(core::multilink::optimal_link_count(&channels(gains)?, rate))
}

/// Minimum-power allocation; returns a dict with rates, bits, powers, total_power.
#[pyfunction]
#[pyo3(signature = (gains, rate, bits=10_000))]
fn allocate<'py>(py: Python<'py>, gains: Vec<f64>, rate: f64, bits: u64) -> PyResult<Bound<'py, PyDict>> {
    let plan = core::multilink::allocate_rate(&channels(gains)?, rate, bits).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("links_used", plan.links_used)?;
    d.set_item("rates", plan.rates)?;
    d.set_item("bits", plan.bits)?;
    d.set_item("powers", plan.powers)?;
    d.set_item("total_power", plan.total_power)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (gains, rate, step=0.005))]
fn grid_oracle(gains: Vec<f64>, rate: f64, step: f64) -> PyResult<f64> {
    core::multilink::grid_oracle(&channels(gains)?, rate, step).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rate, eps, alpha=2.0))]
fn m_epsilon(rate: f64, eps: f64, alpha: f64) -> PyResult<usize> {
    core::geometry::m_epsilon(rate, alpha, eps).map_err(err)
}

/// Minimum AP density in APs/km^2.
#[pyfunction]
#[pyo3(signature = (rate, eps, delta, radius, alpha=2.0))]
fn lambda_epsilon_delta(rate: f64, eps: f64, delta: f64, radius: f64, alpha: f64) -> PyResult<f64> {
    core::geometry::lambda_epsilon_delta(rate, alpha, eps, delta, radius).map_err(err)
}

/// `pmf[n - 1] = P{N* = n}` for n up to `n_max`.
#[pyfunction]
#[pyo3(signature = (rate, n_max, alpha=2.0))]
fn n_star_pmf(rate: f64, n_max: usize, alpha: f64) -> Vec<f64> {
    core::geometry::n_star_pmf_analytic(rate, alpha, n_max).pmf
}

#[pyfunction]
#[pyo3(signature = (rate, intensity_per_km2, trials, seed=1, alpha=2.0))]
fn n_star_pmf_montecarlo(rate: f64, intensity_per_km2: f64, trials: u64, seed: u64, alpha: f64) -> PyResult<Vec<f64>> {
    let emp = core::geometry::n_star_pmf_montecarlo(rate, alpha, core::geometry::per_km2(intensity_per_km2), trials, seed)
        .map_err(err)?;
    Ok(emp.pmf())
}

/// Blocking probability `1 - exp(-beta d - q)` per distance.
#[pyfunction]
#[pyo3(signature = (distances, mu_per_km2, mean_w=2.0, mean_x=2.0))]
fn blocking_probs(distances: Vec<f64>, mu_per_km2: f64, mean_w: f64, mean_x: f64) -> PyResult<Vec<f64>> {
    let env = core::blocking::BlockageEnv::per_km2(mu_per_km2, mean_w, mean_x).map_err(err)?;
    Ok(core::blocking::blocking_probs_from_distances(&env, &distances))
}

/// Overprovisioned powers; returns (per_link_power, average_power, water_level).
#[pyfunction]
#[pyo3(signature = (gains, blocking, rate, budget=None))]
fn solve_waterfill(gains: Vec<f64>, blocking: Vec<f64>, rate: f64, budget: Option<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = gains.into_iter().zip(blocking).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (g, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let s = core::overprovision::solve_waterfill(&ChannelSet::new(g).map_err(err)?, &p, rate, budget).map_err(err)?;
    Ok((s.per_link_power, s.average_power, s.water_level))
}

fn spec(block_lengths: Vec<u64>, probs: Vec<f64>, rate: f64) -> PyResult<core::erasure::BlockCodeSpec> {
    core::erasure::BlockCodeSpec::new(block_lengths, probs, rate).map_err(err)
}

#[pyfunction]
fn exact_outage(block_lengths: Vec<u64>, probs: Vec<f64>, rate: f64) -> PyResult<f64> {
    core::erasure::exact_outage(&spec(block_lengths, probs, rate)?).map_err(err)
}

#[pyfunction]
fn outage_bounds(block_lengths: Vec<u64>, probs: Vec<f64>, rate: f64) -> PyResult<(f64, f64)> {
    Ok(core::erasure::outage_bounds(&spec(block_lengths, probs, rate)?))
}

#[pyfunction]
fn singleton_bound(block_lengths: Vec<u64>, probs: Vec<f64>, rate: f64) -> PyResult<usize> {
    Ok(core::erasure::singleton_bound(&spec(block_lengths, probs, rate)?))
}

/// Word error probability of a binary linear code given as generator rows
/// (bit j of a row is coded bit j).
#[pyfunction]
fn word_error_probability(rows: Vec<u128>, block_lengths: Vec<usize>, probs: Vec<f64>) -> PyResult<f64> {
    let n_c = block_lengths.iter().sum();
    let code = core::erasure::LinearCode::new(rows, n_c, block_lengths).map_err(err)?;
    code.word_error_probability(&probs).map_err(err)
}

/// Runs an experiment and returns its CSV text.
#[pyfunction]
#[pyo3(signature = (experiment, config="", seed=None, trials=None, workers=None))]
fn run_experiment(py: Python<'_>, experiment: &str, config: &str, seed: Option<u64>, trials: Option<u64>, workers: Option<usize>) -> PyResult<String> {
    let id: ExperimentId = experiment.parse().map_err(|e| ConfigError::new_err(format!("{e}")))?;
    let cfg = validate_config(config, Some(id), &Overrides { seed, trials, workers, ..Default::default() })
        .map_err(|e| ConfigError::new_err(e.to_string()))?;
    py.detach(|| run(&cfg)).map(|a| a.to_csv()).map_err(|e| match e {
        ExperimentError::Config(c) => ConfigError::new_err(c.to_string()),
        ExperimentError::Numeric(n) => err(n),
        ExperimentError::Io(s) => PyValueError::new_err(s),
    })
}

#[pymodule]
#[pyo3(name = "mmwave_offload")]
fn mmwave_offload_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OffloadNumericError", m.py().get_type::<OffloadNumericError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("RNG", core::rng::RNG_NAME)?;
    m.add_function(wrap_pyfunction!(gains_from_distances, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_link_count, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(grid_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(m_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_epsilon_delta, m)?)?;
    m.add_function(wrap_pyfunction!(n_star_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(n_star_pmf_montecarlo, m)?)?;
    m.add_function(wrap_pyfunction!(blocking_probs, m)?)?;
    m.add_function(wrap_pyfunction!(solve_waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(exact_outage, m)?)?;
    m.add_function(wrap_pyfunction!(outage_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(singleton_bound, m)?)?;
    m.add_function(wrap_pyfunction!(word_error_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
