"""End-to-end calibration from prices alone (no latent state, no truth given).

A Bates path is simulated, the calibrator sees only the prices, and the
chain of posterior draws is summarised against the hidden truth.  Uses a
reduced cycle/particle budget so the demo finishes in about a minute; scale
n_samples/n_particles up (500/1000) for a production-grade run.

Run:  python demos/03_calibrate_from_prices.py
"""

import numpy as np

from hestonpf import (
    HestonParams,
    JumpParams,
    PriorConfig,
    TimeGrid,
    calibrate,
    simulate_bates,
)

grid = TimeGrid.from_maturity(3.0, 1.0 / 252.0)
truth = HestonParams(mu=0.1, kappa=1.0, theta=0.05, sigma=0.01, rho=-0.5)
jumps = JumpParams(lam=1.0, mu_j=-0.8, sigma_j=0.2)
path = simulate_bates(truth, jumps, grid, s0=100.0, v0=truth.theta, seed=4)
print(f"simulated {grid.n_steps} daily steps over {grid.maturity} years, "
      f"{len(path.jump_times)} jumps hidden in the prices")

priors = PriorConfig(n_samples=120, n_particles=500)
truth_map = {"mu": 0.1, "kappa": 1.0, "theta": 0.05, "sigma": 0.01, "rho": -0.5,
             "lam": 1.0, "mu_j": -0.8, "sigma_j": 0.2}
report = calibrate(path.prices, grid.dt, priors, with_jumps=True, seed=4, truth=truth_map)

print(f"\n{'parameter':10s} {'true':>8s} {'estimate':>10s} {'rel.err %':>10s}")
for name, true_val in truth_map.items():
    est = report.point_estimates[name]
    err = report.relative_errors[name]
    print(f"{name:10s} {true_val:8.3f} {est:10.4f} {err:10.2f}")

vol = report.filter_output.vol_estimate
print(f"\nfinal filtered variance: mean {vol.mean():.4f} vs true {path.true_vol.mean():.4f}")
theta_draws = [rec.theta for rec in report.chain]
print(f"theta chain: starts {theta_draws[0]:.4f}, ends {theta_draws[-1]:.4f} "
      f"(truth {truth.theta}); sd {np.std(theta_draws):.4f}")
