"""Smoke test for the mmwave_offload extension module."""

import math

import mmwave_offload as mo


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    (a,) = mo.gains_from_distances([50.0])
    assert close(a, 51279.079414041604, 1e-10), a

    gains = mo.gains_from_distances([30.0, 45.0, 80.0, 120.0])
    plan = mo.allocate(gains, 8.0, bits=10_000)
    assert plan["links_used"] == mo.optimal_link_count(gains, 8.0)
    assert sum(plan["bits"]) == 10_000
    assert close(sum(plan["rates"]), 8.0)
    grid = mo.grid_oracle(gains[:2], 2.0)
    two = mo.allocate(gains[:2], 2.0)["total_power"]
    assert two - 1e-9 <= grid <= two * 1.01

    assert [mo.m_epsilon(r, 0.1) for r in (0.5, 1, 2, 4, 8, 16)] == [2, 3, 4, 6, 10, 16]
    assert math.floor(mo.lambda_epsilon_delta(0.5, 0.1, 0.1, 100.0)) == 123
    pmf = mo.n_star_pmf(8.0, 200)
    assert close(sum(pmf), 1.0, 1e-12)
    emp = mo.n_star_pmf_montecarlo(2.0, 100.0, 5000, seed=3)
    assert abs(emp[0] - 0.25) < 0.03

    (p,) = mo.blocking_probs([100.0], 100.0)
    assert close(1.0 - p, 0.9744668374910305, 1e-12)
    powers, avg, level = mo.solve_waterfill(gains[:2], [0.1, 0.2], 8.0)
    assert avg > 0 and all(x >= 0 for x in powers) and level > 0

    assert close(mo.exact_outage([50, 50], [0.2, 0.3], 0.5), 0.06)
    lo, hi = mo.outage_bounds([50, 50], [0.2, 0.3], 0.5)
    assert close(lo, 0.06) and close(hi, 0.06)
    assert mo.singleton_bound([1, 1, 1], [0.1, 0.1, 0.1], 1 / 3) == 3
    assert close(mo.word_error_probability([0b11], [1, 1], [0.1, 0.2]), 0.01)

    csv = mo.run_experiment("table1")
    assert csv.splitlines()[1] == "0.5,2,3", csv
    try:
        mo.run_experiment("fig3", "trials = 0")
    except mo.ConfigError:
        pass
    else:
        raise AssertionError("trials = 0 accepted")
    try:
        mo.exact_outage([1], [0.5], 2.0)
    except mo.OffloadNumericError:
        pass
    else:
        raise AssertionError("rate 2 accepted")
    first = mo.run_experiment("fig7", "trials = 10\nmu_per_km2 = [0, 200]", seed=5, workers=1)
    assert first == mo.run_experiment("fig7", "trials = 10\nmu_per_km2 = [0, 200]", seed=5, workers=4)
    print("smoke test passed")


if __name__ == "__main__":
    main()
