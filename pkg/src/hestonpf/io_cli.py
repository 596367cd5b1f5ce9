"""Command-line surface: price ingestion, config parsing, report emission.

Subcommands::

    simulate            write a synthetic Heston/Bates path to CSV
    calibrate           estimate parameters from a price CSV
    experiment          prior-shift | pf-budget | sigma-dispersion | exemplary

Exit codes: 0 success, 1 validation/usage error, 2 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bayes import PriorConfig
from .calibrate import (
    CalibrationReport,
    calibrate,
    experiment_pf_budget,
    experiment_prior_shift,
    experiment_sigma_dispersion,
)
from .errors import (
    CalibrationError,
    ConfigError,
    IngestionError,
    ParameterError,
)
from .sde import HestonParams, JumpParams, SimulatedPath, TimeGrid, simulate_bates, simulate_heston

logger = logging.getLogger(__name__)

DEFAULT_DT = 1.0 / 252.0  # step-indexed inputs assume a daily-style grid
SPACING_RTOL = 1e-6
DEFAULT_BINS = 50

# Exemplary-run ground truth (diffusion + jumps) used by `experiment exemplary`
EXEMPLARY_TRUTH = {
    "mu": 0.1,
    "kappa": 1.0,
    "theta": 0.05,
    "sigma": 0.01,
    "rho": -0.5,
    "lam": 1.0,
    "mu_j": -0.8,
    "sigma_j": 0.2,
}

_PRIOR_KEYS = {f.name for f in dataclasses.fields(PriorConfig)}
_RUN_KEYS = {"dt", "mode", "seed", "burn_in"}
_JUMP_PRIOR_KEYS = {"lambda_th", "mu0_j", "sigma0_j"}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings: priors plus grid, mode, seed and burn-in."""

    priors: PriorConfig
    dt: float | None = None
    mode: str = "heston"
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("heston", "bates"):
            raise ConfigError(f"mode must be 'heston' or 'bates', got {self.mode!r}")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")


def load_prices(path, dt_override: float | None = None) -> tuple[np.ndarray, float]:
    """Read a `time,price` or `step,price` CSV and return (prices, dt).

    Time is in years and must be strictly increasing with uniform spacing
    (relative tolerance 1e-6); dt is the median spacing unless overridden.
    A `step` column implies dt = 1/252 unless overridden.  Row numbers in
    error messages count data rows from 1.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if header is None or len(header) < 2:
        raise IngestionError(f"{path}: missing 'time,price' or 'step,price' header")
    kind = header[0].strip().lower()
    if kind not in ("time", "step") or header[1].strip().lower() != "price":
        raise IngestionError(f"{path}: header must be 'time,price' or 'step,price'")
    if len(rows) < 3:
        raise IngestionError(f"{path}: fewer than 3 data rows")

    times = np.empty(len(rows))
    prices = np.empty(len(rows))
    for i, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise IngestionError(f"{path}: row {i}: expected two columns")
        try:
            times[i - 1] = float(row[0])
            prices[i - 1] = float(row[1])
        except ValueError as exc:
            raise IngestionError(f"{path}: row {i}: {exc}") from exc
        if prices[i - 1] <= 0.0:
            raise IngestionError(f"{path}: row {i}: price must be positive")

    spacing = np.diff(times)
    if np.any(spacing <= 0.0):
        bad = int(np.argmax(spacing <= 0.0)) + 2
        raise IngestionError(f"{path}: row {bad}: time must be strictly increasing")
    if kind == "time":
        dt = float(np.median(spacing))
        off = np.abs(spacing - dt) > SPACING_RTOL * dt
        if np.any(off):
            bad = int(np.argmax(off)) + 2
            raise IngestionError(f"{path}: row {bad}: non-uniform time spacing")
        if dt_override is not None:
            dt = dt_override
    else:
        dt = dt_override if dt_override is not None else DEFAULT_DT
    return prices, dt


def load_config(path, mode: str | None = None) -> RunConfig:
    """Parse a strict-schema JSON config; omitted priors fall back to the shipped defaults.

    Unknown keys are rejected (a typo in a prior name would otherwise
    silently change the estimation).  Bates mode requires the jump priors
    (lambda_th, mu0_j, sigma0_j) to be explicit.
    """
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
    unknown = set(raw) - _PRIOR_KEYS - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    resolved_mode = mode if mode is not None else raw.get("mode", "heston")
    if resolved_mode == "bates":
        missing = _JUMP_PRIOR_KEYS - set(raw)
        if missing:
            raise ConfigError(f"bates mode requires explicit jump priors: {sorted(missing)}")

    prior_kwargs = {k: v for k, v in raw.items() if k in _PRIOR_KEYS}
    if "mu0_beta" in prior_kwargs:
        prior_kwargs["mu0_beta"] = tuple(prior_kwargs["mu0_beta"])
    if "lambda0_beta" in prior_kwargs:
        prior_kwargs["lambda0_beta"] = tuple(tuple(row) for row in prior_kwargs["lambda0_beta"])
    try:
        priors = PriorConfig(**prior_kwargs)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"invalid prior configuration: {exc}") from exc
    return RunConfig(
        priors=priors,
        dt=raw.get("dt"),
        mode=resolved_mode,
        seed=int(raw.get("seed", 0)),
        burn_in=int(raw.get("burn_in", 0)),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_path_csv(path: SimulatedPath, out_path) -> None:
    """Write a simulated path as `step,time,price,true_vol,jump_flag,jump_size`."""
    rows = []
    jumps = path.jump_sizes
    for k in range(path.grid.n_steps + 1):
        jumped = k in jumps
        rows.append(
            (
                k,
                k * path.grid.dt,
                path.prices[k],
                path.true_vol[k],
                1 if jumped else None,
                jumps.get(k),
            )
        )
    _write_csv(Path(out_path), ["step", "time", "price", "true_vol", "jump_flag", "jump_size"], rows)


def _config_echo(config: PriorConfig) -> dict:
    echo = dataclasses.asdict(config)
    echo["mu0_beta"] = list(echo["mu0_beta"])
    echo["lambda0_beta"] = [list(row) for row in echo["lambda0_beta"]]
    return echo


def emit_report(report: CalibrationReport, out_dir, bins: int = DEFAULT_BINS, trace: bool = False) -> dict[str, Path]:
    """Write report.json, chain.csv, volatility.csv, hist_<param>.csv (and trace.csv).

    Relative errors, when present, are reported as percentages rounded to
    two decimals.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}

    doc = {
        "point_estimates": {k: float(v) for k, v in report.point_estimates.items()},
        "relative_errors_pct": (
            {k: round(float(v), 2) for k, v in report.relative_errors.items()}
            if report.relative_errors is not None
            else None
        ),
        "truth": {k: float(v) for k, v in report.truth.items()} or None,
        "config": _config_echo(report.config),
        "dt": report.dt,
        "seed": report.seed,
        "mode": "bates" if report.with_jumps else "heston",
        "burn_in": report.burn_in,
        "n_cycles": len(report.chain),
    }
    files["report"] = out / "report.json"
    files["report"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    chain_rows = [
        (
            rec.cycle,
            rec.mu,
            rec.kappa,
            rec.theta,
            rec.sigma,
            rec.rho,
            rec.lam,
            rec.mu_j,
            rec.sigma_j,
            rec.filter_rerun,
        )
        for rec in report.chain
    ]
    files["chain"] = out / "chain.csv"
    _write_csv(
        files["chain"],
        ["cycle", "mu", "kappa", "theta", "sigma", "rho", "lambda", "mu_j", "sigma_j", "filter_rerun"],
        chain_rows,
    )

    vol = report.filter_output.vol_estimate
    files["volatility"] = out / "volatility.csv"
    _write_csv(files["volatility"], ["step", "estimate"], list(enumerate(vol)))

    names = ["mu", "kappa", "theta", "sigma", "rho"]
    if report.with_jumps:
        names += ["lam", "mu_j", "sigma_j"]
    for name in names:
        samples = np.array([getattr(rec, name) for rec in report.chain], dtype=float)
        counts, edges = np.histogram(samples, bins=bins)
        label = "lambda" if name == "lam" else name
        files[f"hist_{label}"] = out / f"hist_{label}.csv"
        _write_csv(
            files[f"hist_{label}"],
            ["bin_left", "bin_right", "count"],
            [(edges[i], edges[i + 1], int(counts[i])) for i in range(counts.size)],
        )

    if trace:
        jp = report.filter_output.jump_prob
        jz = report.filter_output.jump_size
        rows = []
        for k in range(vol.size):
            # jump traces cover steps 1..n; step 0 has no return
            has_jump = jp is not None and 1 <= k <= jp.size
            rows.append(
                (
                    k,
                    vol[k],
                    jp[k - 1] if has_jump else None,
                    jz[k - 1] if has_jump else None,
                )
            )
        files["trace"] = out / "trace.csv"
        _write_csv(files["trace"], ["step", "vol_estimate", "jump_prob", "jump_size"], rows)
    return files


def _add_simulate_parser(sub) -> None:
    p = sub.add_parser("simulate", help="simulate a Heston or Bates path to CSV")
    p.add_argument("--mode", choices=["heston", "bates"], default="heston")
    p.add_argument("--mu", type=float, default=EXEMPLARY_TRUTH["mu"])
    p.add_argument("--kappa", type=float, default=EXEMPLARY_TRUTH["kappa"])
    p.add_argument("--theta", type=float, default=EXEMPLARY_TRUTH["theta"])
    p.add_argument("--sigma", type=float, default=EXEMPLARY_TRUTH["sigma"])
    p.add_argument("--rho", type=float, default=EXEMPLARY_TRUTH["rho"])
    p.add_argument("--lam", type=float, default=EXEMPLARY_TRUTH["lam"], help="jump intensity per year")
    p.add_argument("--mu-j", type=float, default=EXEMPLARY_TRUTH["mu_j"])
    p.add_argument("--sigma-j", type=float, default=EXEMPLARY_TRUTH["sigma_j"])
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--v0", type=float, default=None, help="initial variance (default: theta)")
    p.add_argument("--maturity", type=float, default=3.0, help="horizon in years")
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")


def _add_calibrate_parser(sub) -> None:
    p = sub.add_parser("calibrate", help="calibrate model parameters from a price CSV")
    p.add_argument("--prices", required=True, help="CSV with time,price or step,price")
    p.add_argument("--config", default=None, help="JSON config (strict schema)")
    p.add_argument("--mode", choices=["heston", "bates"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--trace", action="store_true", help="also dump the per-step filter trace")
    p.add_argument("--out", required=True, help="output directory")


def _add_experiment_parser(sub) -> None:
    p = sub.add_parser("experiment", help="run one of the study procedures")
    kinds = p.add_subparsers(dest="kind", required=True)

    ps = kinds.add_parser("prior-shift", help="theta estimates vs prior shift and chain length")
    ps.add_argument("--shifts", type=float, nargs="+", default=[0.0, 1.0])
    ps.add_argument("--cycle-counts", type=int, nargs="+", default=[10, 100])
    ps.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ps.add_argument("--particles", type=int, default=300)
    ps.add_argument("--out", required=True)

    pb = kinds.add_parser("pf-budget", help="per-cycle theta draws vs filter budget")
    pb.add_argument("--fractions", type=float, nargs="+", default=[0.05, 1.0])
    pb.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    pb.add_argument("--cycles", type=int, default=150)
    pb.add_argument("--particles", type=int, default=300)
    pb.add_argument("--out", required=True)

    sd = kinds.add_parser("sigma-dispersion", help="kappa dispersion vs vol-of-vol")
    sd.add_argument("--sigmas", type=float, nargs="+", default=[0.01, 0.1])
    sd.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    sd.add_argument("--cycles", type=int, default=100)
    sd.add_argument("--particles", type=int, default=300)
    sd.add_argument("--out", required=True)

    ex = kinds.add_parser("exemplary", help="full exemplary reproduction (slow)")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--cycles", type=int, default=500)
    ex.add_argument("--particles", type=int, default=1000)
    ex.add_argument("--out", required=True)


def _cmd_simulate(args) -> int:
    grid = TimeGrid.from_maturity(args.maturity, args.dt)
    params = HestonParams(args.mu, args.kappa, args.theta, args.sigma, args.rho)
    v0 = args.v0 if args.v0 is not None else args.theta
    if args.mode == "bates":
        path = simulate_bates(
            params, JumpParams(args.lam, args.mu_j, args.sigma_j), grid, args.s0, v0, args.seed
        )
    else:
        path = simulate_heston(params, grid, args.s0, v0, args.seed)
    write_path_csv(path, args.out)
    print(f"wrote {args.out} ({grid.n_steps + 1} rows, {len(path.jump_times)} jumps)")
    return 0


def _cmd_calibrate(args) -> int:
    config = load_config(args.config, mode=args.mode)
    prices, dt = load_prices(args.prices, dt_override=config.dt)
    seed = args.seed if args.seed is not None else config.seed
    burn_in = args.burn_in if args.burn_in is not None else config.burn_in
    report = calibrate(
        prices,
        dt,
        config.priors,
        with_jumps=(config.mode == "bates"),
        seed=seed,
        burn_in=burn_in,
    )
    files = emit_report(report, args.out, bins=args.bins, trace=args.trace)
    for name, value in report.point_estimates.items():
        print(f"{name:8s} {value: .6f}")
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = HestonParams(
        EXEMPLARY_TRUTH["mu"],
        EXEMPLARY_TRUTH["kappa"],
        EXEMPLARY_TRUTH["theta"],
        EXEMPLARY_TRUTH["sigma"],
        EXEMPLARY_TRUTH["rho"],
    )
    grid = TimeGrid.from_maturity(3.0, DEFAULT_DT)
    if args.kind == "prior-shift":
        rows = experiment_prior_shift(
            truth, grid, args.shifts, args.cycle_counts, args.seeds, n_particles=args.particles
        )
        _write_csv(
            out / "prior_shift.csv",
            ["shift", "n_cycles", "seed", "theta_true", "theta_hat"],
            [tuple(r.values()) for r in rows],
        )
        print(f"wrote {out / 'prior_shift.csv'} ({len(rows)} rows)")
    elif args.kind == "pf-budget":
        rows = experiment_pf_budget(
            truth,
            grid,
            args.fractions,
            args.seeds,
            n_samples=args.cycles,
            n_particles=args.particles,
        )
        _write_csv(
            out / "pf_budget.csv",
            ["pf_fraction", "seed", "cycle", "theta_true", "theta_i"],
            [tuple(r.values()) for r in rows],
        )
        print(f"wrote {out / 'pf_budget.csv'} ({len(rows)} rows)")
    elif args.kind == "sigma-dispersion":
        rows = experiment_sigma_dispersion(
            truth, args.sigmas, grid, args.seeds, n_samples=args.cycles, n_particles=args.particles
        )
        _write_csv(
            out / "sigma_dispersion.csv",
            ["sigma", "seed", "kappa_true", "kappa_hat", "kappa_chain_sd"],
            [tuple(r.values()) for r in rows],
        )
        print(f"wrote {out / 'sigma_dispersion.csv'} ({len(rows)} rows)")
    else:  # exemplary
        return _cmd_exemplary(args, truth, grid, out)
    return 0


def _cmd_exemplary(args, truth: HestonParams, grid: TimeGrid, out: Path) -> int:
    jumps = JumpParams(EXEMPLARY_TRUTH["lam"], EXEMPLARY_TRUTH["mu_j"], EXEMPLARY_TRUTH["sigma_j"])
    path = simulate_bates(truth, jumps, grid, 100.0, truth.theta, args.seed)
    priors = PriorConfig(n_samples=args.cycles, n_particles=args.particles)
    report = calibrate(
        path.prices,
        grid.dt,
        priors,
        with_jumps=True,
        seed=args.seed,
        truth=EXEMPLARY_TRUTH,
    )
    emit_report(report, out)
    rows = []
    for name, true_val in EXEMPLARY_TRUTH.items():
        est = report.point_estimates[name]
        rel = report.relative_errors[name]
        label = "lambda" if name == "lam" else name
        rows.append((label, true_val, est, f"{rel:.2f}"))
        print(f"{label:8s} true {true_val: .4f}  est {est: .6f}  rel.err {rel:6.2f}%")
    _write_csv(
        out / "exemplary_table.csv",
        ["parameter", "true_value", "estimated_value", "relative_error_pct"],
        rows,
    )
    print(f"wrote {out / 'exemplary_table.csv'}")
    return 0


def cli_dispatch(argv=None) -> int:
    """Parse arguments and run the requested subcommand; returns the exit code."""
    parser = argparse.ArgumentParser(
        prog="hestonpf",
        description="Heston/Bates calibration from prices via Bayesian regression and particle filtering",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate_parser(sub)
    _add_calibrate_parser(sub)
    _add_experiment_parser(sub)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map to the documented code 1
        return 0 if exc.code == 0 else 1

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        return _cmd_experiment(args)
    except (ParameterError, IngestionError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CalibrationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
