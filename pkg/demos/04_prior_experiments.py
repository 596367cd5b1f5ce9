"""Study procedures: prior influence, particle-filter budget, vol-of-vol impact.

Small-scale renditions of the three experiment runners; each prints a
long-format table you can redirect to CSV for plotting.  Expect a few
minutes of runtime.

Run:  python demos/04_prior_experiments.py
"""

import numpy as np

from hestonpf import (
    HestonParams,
    TimeGrid,
    experiment_pf_budget,
    experiment_prior_shift,
    experiment_sigma_dispersion,
)

grid = TimeGrid.from_maturity(3.0, 1.0 / 252.0)
truth = HestonParams(mu=0.1, kappa=1.0, theta=0.05, sigma=0.01, rho=-0.5)

print("== theta estimates vs prior shift and chain length ==")
rows = experiment_prior_shift(
    truth, grid, shifts=[0.0, 1.0], cycle_counts=[10, 60], seeds=[0, 1, 2], n_particles=200
)
for r in rows:
    print(f"shift {r['shift']:+.1f}  cycles {r['n_cycles']:3d}  seed {r['seed']}  "
          f"theta_hat {r['theta_hat']:.4f}  (true {r['theta_true']})")

print("\n== per-cycle theta draws vs particle-filter budget (+100% shifted prior) ==")
rows = experiment_pf_budget(
    truth, grid, fractions=[0.05, 1.0], seeds=[0], n_samples=40, n_particles=200
)
for frac in (0.05, 1.0):
    traj = [r["theta_i"] for r in rows if r["pf_fraction"] == frac]
    print(f"pf_fraction {frac}: cycle 1 {traj[0]:.4f} -> cycle 40 {traj[-1]:.4f} "
          f"(mean {np.mean(traj):.4f})")

print("\n== kappa-chain dispersion vs vol-of-vol ==")
rows = experiment_sigma_dispersion(
    truth, [0.01, 0.1], grid, seeds=[0, 1, 2], n_samples=40, n_particles=200
)
for r in rows:
    print(f"sigma {r['sigma']:.2f}  seed {r['seed']}  kappa_hat {r['kappa_hat']:6.2f}  "
          f"chain sd {r['kappa_chain_sd']:.3f}")
