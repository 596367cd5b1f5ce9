"""Recover the latent volatility path with the particle filter.

Simulates a Bates path with a visible vol-of-vol, runs one filtering pass at
the true parameters, and plots the estimate against the hidden truth with
the per-step jump probabilities.

Run:  python demos/02_filter_volatility.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hestonpf import (
    HestonParams,
    JumpParams,
    PriorConfig,
    ReturnSeries,
    Substreams,
    TimeGrid,
    run_filter,
    simulate_bates,
)

HERE = Path(__file__).parent

grid = TimeGrid.from_maturity(3.0, 1.0 / 252.0)
params = HestonParams(mu=0.1, kappa=2.0, theta=0.05, sigma=0.15, rho=-0.5)
jumps = JumpParams(lam=1.0, mu_j=-0.8, sigma_j=0.2)
path = simulate_bates(params, jumps, grid, s0=100.0, v0=params.theta, seed=21)

priors = PriorConfig(n_particles=1000)
returns = ReturnSeries.from_prices(path.prices, grid.dt)
out = run_filter(returns, params, priors, with_jumps=True, streams=Substreams(0, 0))

rmse = float(np.sqrt(np.mean((out.vol_estimate - path.true_vol) ** 2)))
print(f"vol RMSE {rmse:.5f} on a mean level of {path.true_vol.mean():.4f}")
print("jump probabilities at the true jump steps:")
for k in path.jump_times:
    print(f"  step {k}: lambda={out.jump_prob[k - 1]:.3f}  "
          f"size est {out.jump_size[k - 1]:+.3f} vs true {path.jump_sizes[k]:+.3f}")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
t = grid.times
ax1.plot(t, path.true_vol, label="true variance", lw=0.9)
ax1.plot(t, out.vol_estimate, label="particle-filter estimate", lw=0.9)
ax1.set_ylabel("variance")
ax1.legend()
ax2.vlines(t[1:], 0, out.jump_prob, lw=1.2, color="tab:red")
ax2.set_ylabel("jump probability")
ax2.set_xlabel("years")
fig.suptitle("Latent volatility recovery and jump detection")
fig.savefig(HERE / "demo_filter.png", dpi=110)
print(f"wrote {HERE / 'demo_filter.png'}")
