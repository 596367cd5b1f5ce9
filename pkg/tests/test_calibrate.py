"""Chain bookkeeping, summaries, determinism, and experiment plumbing."""

import numpy as np
import pytest

from hestonpf import (
    ChainRecord,
    HestonParams,
    ParameterError,
    PriorConfig,
    TimeGrid,
    calibrate,
    experiment_pf_budget,
    experiment_prior_shift,
    experiment_sigma_dispersion,
    priors_centered_on,
    simulate_bates,
    simulate_heston,
    summarize,
)
from hestonpf.sde import JumpParams

DT = 1.0 / 252.0
GRID = TimeGrid.from_maturity(0.5, DT)
TRUTH = HestonParams(0.1, 1.0, 0.05, 0.01, -0.5)


def small_priors(**kw):
    defaults = dict(n_samples=6, n_particles=40)
    defaults.update(kw)
    return priors_centered_on(TRUTH, DT, **defaults)


def record(cycle, theta=0.05, **kw):
    base = dict(mu=0.1, kappa=1.0, theta=theta, sigma=0.01, rho=-0.5)
    base.update(kw)
    return ChainRecord(cycle=cycle, **base)


def test_summarize_constant_chain():
    chain = [record(i) for i in range(1, 6)]
    estimates, errors = summarize(chain)
    assert estimates["theta"] == 0.05
    assert errors is None


def test_summarize_relative_error_convention():
    # |0.0493 - 0.05| / 0.05 * 100 = 1.40 percent (two-decimal reporting)
    chain = [record(1, theta=0.0493)]
    _, errors = summarize(chain, truth={"theta": 0.05})
    assert round(errors["theta"], 2) == 1.40


def test_summarize_burn_in_bounds():
    chain = [record(i) for i in range(1, 4)]
    with pytest.raises(ParameterError):
        summarize(chain, burn_in=3)
    with pytest.raises(ParameterError):
        summarize([], burn_in=0)


def test_summarize_applies_burn_in():
    chain = [record(1, theta=1.0), record(2, theta=0.0), record(3, theta=0.0)]
    estimates, _ = summarize(chain, burn_in=1)
    assert estimates["theta"] == 0.0


def test_calibrate_point_estimates_equal_chain_means():
    path = simulate_heston(TRUTH, GRID, 100.0, 0.05, seed=0)
    report = calibrate(path.prices, DT, small_priors(), seed=0)
    for name in ("mu", "kappa", "theta", "sigma", "rho"):
        mean = np.mean([getattr(rec, name) for rec in report.chain])
        assert report.point_estimates[name] == pytest.approx(mean, abs=1e-12)
    assert len(report.chain) == 6
    assert [rec.cycle for rec in report.chain] == [1, 2, 3, 4, 5, 6]


def test_calibrate_deterministic():
    path = simulate_heston(TRUTH, GRID, 100.0, 0.05, seed=1)
    a = calibrate(path.prices, DT, small_priors(), seed=7)
    b = calibrate(path.prices, DT, small_priors(), seed=7)
    assert a.point_estimates == b.point_estimates
    for ra, rb in zip(a.chain, b.chain):
        assert ra == rb


def test_calibrate_filter_schedule():
    path = simulate_heston(TRUTH, GRID, 100.0, 0.05, seed=2)
    report = calibrate(path.prices, DT, small_priors(n_samples=10, pf_fraction=0.3), seed=0)
    reran = [rec.filter_rerun for rec in report.chain]
    assert reran == [True] * 3 + [False] * 7  # ceil(0.3 * 10) = 3


def test_calibrate_full_schedule_reruns_every_cycle():
    path = simulate_heston(TRUTH, GRID, 100.0, 0.05, seed=2)
    report = calibrate(path.prices, DT, small_priors(), seed=0)
    assert all(rec.filter_rerun for rec in report.chain)


def test_calibrate_jump_fields_all_or_none():
    path = simulate_bates(TRUTH, JumpParams(2.0, -0.8, 0.2), GRID, 100.0, 0.05, seed=3)
    heston_report = calibrate(path.prices, DT, small_priors(), seed=0)
    assert all(
        rec.lam is None and rec.mu_j is None and rec.sigma_j is None
        for rec in heston_report.chain
    )
    bates_report = calibrate(path.prices, DT, small_priors(), with_jumps=True, seed=0)
    assert all(
        rec.lam is not None and rec.mu_j is not None and rec.sigma_j is not None
        for rec in bates_report.chain
    )
    assert "lam" in bates_report.point_estimates


def test_calibrate_relative_errors_reported():
    path = simulate_heston(TRUTH, GRID, 100.0, 0.05, seed=4)
    truth = {"mu": 0.1, "kappa": 1.0, "theta": 0.05, "sigma": 0.01, "rho": -0.5}
    report = calibrate(path.prices, DT, small_priors(), seed=0, truth=truth)
    assert set(report.relative_errors) == set(truth)
    assert all(v >= 0.0 for v in report.relative_errors.values())


def test_calibrate_validates_inputs():
    with pytest.raises(ParameterError):
        calibrate([100.0, 101.0], DT, small_priors(), seed=0)


def test_experiment_prior_shift_row_count():
    grid = TimeGrid.from_maturity(0.25, DT)
    rows = experiment_prior_shift(
        TRUTH, grid, shifts=[0.0, 1.0], cycle_counts=[2, 3], seeds=[0, 1], n_particles=30
    )
    assert len(rows) == 2 * 2 * 2
    assert {r["shift"] for r in rows} == {0.0, 1.0}
    assert all(r["theta_true"] == 0.05 for r in rows)


def test_experiment_pf_budget_rows_per_cycle():
    grid = TimeGrid.from_maturity(0.25, DT)
    rows = experiment_pf_budget(
        TRUTH, grid, fractions=[0.5, 1.0], seeds=[0], n_samples=4, n_particles=30
    )
    assert len(rows) == 2 * 1 * 4
    assert [r["cycle"] for r in rows[:4]] == [1, 2, 3, 4]


def test_experiment_sigma_dispersion_metadata():
    grid = TimeGrid.from_maturity(0.25, DT)
    rows = experiment_sigma_dispersion(
        TRUTH, [0.01], grid, seeds=[0], n_samples=4, n_particles=30
    )
    assert len(rows) == 1
    assert rows[0]["kappa_true"] == 1.0
    assert rows[0]["kappa_chain_sd"] >= 0.0
