"""Simulate Heston and Bates trajectories and plot price/volatility/jumps.

Run:  python demos/01_simulate_paths.py
Writes demo_paths.png and two CSVs next to this script.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from hestonpf import HestonParams, JumpParams, TimeGrid, simulate_bates, simulate_heston
from hestonpf.io_cli import write_path_csv

HERE = Path(__file__).parent

grid = TimeGrid.from_maturity(3.0, 1.0 / 252.0)
params = HestonParams(mu=0.1, kappa=1.0, theta=0.05, sigma=0.01, rho=-0.5)
jumps = JumpParams(lam=1.0, mu_j=-0.8, sigma_j=0.2)

heston = simulate_heston(params, grid, s0=100.0, v0=params.theta, seed=7)
bates = simulate_bates(params, jumps, grid, s0=100.0, v0=params.theta, seed=7)
write_path_csv(heston, HERE / "demo_heston_path.csv")
write_path_csv(bates, HERE / "demo_bates_path.csv")

print(f"bates path jumps at steps {bates.jump_times}")
for k in bates.jump_times:
    print(f"  step {k}: log-size {bates.jump_sizes[k]:+.3f} "
          f"(price ratio x{2.718281828**bates.jump_sizes[k]:.3f})")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
t = grid.times
ax1.plot(t, heston.prices, label="Heston", lw=0.8)
ax1.plot(t, bates.prices, label="Bates (same diffusion noise)", lw=0.8)
for k in bates.jump_times:
    ax1.axvline(k * grid.dt, color="red", alpha=0.3, lw=0.8)
ax1.set_ylabel("price")
ax1.legend()
ax2.plot(t, heston.true_vol, lw=0.8, color="tab:green")
ax2.set_ylabel("variance")
ax2.set_xlabel("years")
fig.suptitle("Simulated trajectories (jump times in red)")
fig.savefig(HERE / "demo_paths.png", dpi=110)
print(f"wrote {HERE / 'demo_paths.png'}")
