"""CSV ingestion, strict-schema config, report emission, CLI exit codes."""

import csv
import json
import math

import numpy as np
import pytest

from hestonpf.errors import ConfigError, IngestionError
from hestonpf.io_cli import cli_dispatch, load_config, load_prices

BATES_CONFIG = {
    "n_samples": 4,
    "n_particles": 30,
    "mu_init": 0.1,
    "kappa_init": 1.0,
    "theta_init": 0.05,
    "sigma_init": 0.01,
    "rho_init": -0.5,
    "lambda_th": 0.15,
    "mu0_j": -0.96,
    "sigma0_j": 0.3,
}


def write_prices(path, rows, header="time,price"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")


def test_load_prices_uniform_rows(tmp_path):
    f = tmp_path / "p.csv"
    write_prices(f, ["0.0,100.0", "0.5,101.0", "1.0,99.5"])
    prices, dt = load_prices(f)
    np.testing.assert_array_equal(prices, [100.0, 101.0, 99.5])
    assert dt == 0.5


def test_load_prices_rejects_zero_price_with_row(tmp_path):
    f = tmp_path / "p.csv"
    write_prices(f, ["0.0,100.0", "0.5,0.0", "1.0,99.5"])
    with pytest.raises(IngestionError, match="row 2"):
        load_prices(f)


def test_load_prices_accepts_tiny_jitter(tmp_path):
    f = tmp_path / "p.csv"
    write_prices(f, ["0.0,100.0", "0.5000000001,101.0", "1.0,99.5"])
    _, dt = load_prices(f)
    assert dt == pytest.approx(0.5, rel=1e-6)


def test_load_prices_rejects_uneven_spacing(tmp_path):
    f = tmp_path / "p.csv"
    write_prices(f, ["0.0,100.0", "0.4,101.0", "1.0,99.5"])
    with pytest.raises(IngestionError, match="non-uniform"):
        load_prices(f)


def test_load_prices_too_few_rows(tmp_path):
    f = tmp_path / "p.csv"
    write_prices(f, ["0.0,100.0", "0.5,101.0"])
    with pytest.raises(IngestionError, match="fewer than 3"):
        load_prices(f)


def test_load_prices_step_column_default_dt(tmp_path):
    f = tmp_path / "p.csv"
    write_prices(f, ["0,100.0", "1,101.0", "2,99.5"], header="step,price")
    _, dt = load_prices(f)
    assert dt == pytest.approx(1.0 / 252.0)
    _, dt2 = load_prices(f, dt_override=0.01)
    assert dt2 == 0.01


def test_load_config_empty_gives_table_defaults(tmp_path):
    f = tmp_path / "c.json"
    f.write_text("{}")
    cfg = load_config(f)
    assert cfg.mode == "heston"
    assert cfg.priors.mu0_eta == 1.00125
    assert cfg.priors.a0_sigma == 149.0
    assert cfg.priors.lambda_th == 0.15
    assert cfg.priors.mu0_j == -0.96


def test_load_config_rejects_unknown_keys(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"mu0_eta_typo": 1.0}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        load_config(f)


def test_load_config_rejects_lambda_th_one(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"lambda_th": 1.0}))
    with pytest.raises(ConfigError):
        load_config(f)


def test_load_config_bates_requires_jump_priors(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"mode": "bates", "lambda_th": 0.15}))
    with pytest.raises(ConfigError, match="jump priors"):
        load_config(f)
    f.write_text(json.dumps({"mode": "bates", "lambda_th": 0.15, "mu0_j": -0.96, "sigma0_j": 0.3}))
    assert load_config(f).mode == "bates"


def test_simulate_cli_writes_expected_csv(tmp_path):
    out = tmp_path / "path.csv"
    code = cli_dispatch(
        ["simulate", "--mode", "bates", "--maturity", "1.0", "--seed", "3", "--out", str(out)]
    )
    assert code == 0
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 253
    assert list(rows[0]) == ["step", "time", "price", "true_vol", "jump_flag", "jump_size"]
    jumps = [r for r in rows if r["jump_flag"] == "1"]
    assert all(r["jump_size"] != "" for r in jumps)
    assert all(r["jump_size"] == "" for r in rows if r["jump_flag"] == "")
    assert float(rows[0]["price"]) == 100.0


def test_calibrate_cli_end_to_end(tmp_path):
    prices = tmp_path / "p.csv"
    code = cli_dispatch(
        ["simulate", "--mode", "heston", "--maturity", "0.5", "--seed", "1", "--out", str(prices)]
    )
    assert code == 0
    # convert the simulate output into the ingestion schema
    with prices.open() as fh:
        rows = list(csv.DictReader(fh))
    ingest = tmp_path / "in.csv"
    ingest.write_text(
        "time,price\n" + "\n".join(f"{r['time']},{r['price']}" for r in rows) + "\n"
    )
    config = tmp_path / "c.json"
    config.write_text(json.dumps(BATES_CONFIG | {"mode": "heston"}))
    out = tmp_path / "out"
    code = cli_dispatch(
        ["calibrate", "--prices", str(ingest), "--config", str(config), "--seed", "5", "--out", str(out), "--trace"]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report["point_estimates"]) == {"mu", "kappa", "theta", "sigma", "rho"}
    assert report["config"]["n_samples"] == 4

    # chain.csv reloaded and averaged reproduces the reported point estimates
    with (out / "chain.csv").open() as fh:
        chain_rows = list(csv.DictReader(fh))
    assert len(chain_rows) == 4
    for name in ("mu", "kappa", "theta", "sigma", "rho"):
        mean = np.mean([float(r[name]) for r in chain_rows])
        assert mean == pytest.approx(report["point_estimates"][name], abs=1e-9)

    assert (out / "volatility.csv").exists()
    assert (out / "trace.csv").exists()
    for name in ("mu", "kappa", "theta", "sigma", "rho"):
        hist = out / f"hist_{name}.csv"
        assert hist.exists()
        with hist.open() as fh:
            bins = list(csv.DictReader(fh))
        assert len(bins) == 50
        assert sum(int(b["count"]) for b in bins) == 4


def test_calibrate_cli_bates_mode(tmp_path):
    prices = tmp_path / "p.csv"
    cli_dispatch(["simulate", "--mode", "bates", "--maturity", "0.5", "--seed", "2", "--out", str(prices)])
    with prices.open() as fh:
        rows = list(csv.DictReader(fh))
    ingest = tmp_path / "in.csv"
    ingest.write_text("time,price\n" + "\n".join(f"{r['time']},{r['price']}" for r in rows) + "\n")
    config = tmp_path / "c.json"
    config.write_text(json.dumps(BATES_CONFIG | {"mode": "bates"}))
    out = tmp_path / "out"
    code = cli_dispatch(["calibrate", "--prices", str(ingest), "--config", str(config), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert "lam" in report["point_estimates"]
    assert (out / "hist_lambda.csv").exists()


def test_cli_exit_codes(tmp_path):
    assert cli_dispatch(["no-such-command"]) == 1
    assert cli_dispatch(["calibrate", "--unknown-flag"]) == 1
    assert cli_dispatch(["--help"]) == 0
    missing = tmp_path / "missing.csv"
    assert cli_dispatch(["calibrate", "--prices", str(missing), "--out", str(tmp_path / "o")]) == 1


def test_experiment_cli_prior_shift(tmp_path):
    out = tmp_path / "exp"
    code = cli_dispatch(
        [
            "experiment", "prior-shift",
            "--shifts", "0.0",
            "--cycle-counts", "2",
            "--seeds", "0",
            "--particles", "30",
            "--out", str(out),
        ]
    )
    assert code == 0
    with (out / "prior_shift.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert math.isfinite(float(rows[0]["theta_hat"]))


def test_experiment_cli_pf_budget_and_dispersion(tmp_path):
    out = tmp_path / "exp"
    code = cli_dispatch(
        ["experiment", "pf-budget", "--fractions", "1.0", "--seeds", "0",
         "--cycles", "2", "--particles", "30", "--out", str(out)]
    )
    assert code == 0
    with (out / "pf_budget.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 2  # one row per cycle
    code = cli_dispatch(
        ["experiment", "sigma-dispersion", "--sigmas", "0.01", "--seeds", "0",
         "--cycles", "2", "--particles", "30", "--out", str(out)]
    )
    assert code == 0
    with (out / "sigma_dispersion.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["kappa_true"] == "1.0"


def test_experiment_cli_exemplary_table(tmp_path):
    out = tmp_path / "exp"
    code = cli_dispatch(
        ["experiment", "exemplary", "--seed", "1", "--cycles", "3",
         "--particles", "40", "--out", str(out)]
    )
    assert code == 0
    with (out / "exemplary_table.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["parameter"] for r in rows] == [
        "mu", "kappa", "theta", "sigma", "rho", "lambda", "mu_j", "sigma_j"
    ]
    assert all(r["relative_error_pct"].count(".") == 1 for r in rows)
    assert (out / "report.json").exists() and (out / "chain.csv").exists()
