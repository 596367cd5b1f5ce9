"""Euler-Maruyama simulation of Heston and Bates price/volatility paths.

Discretisation on a uniform grid with step ``dt``:

    S_k = S_{k-1} * (1 + mu*dt + sqrt(v_{k-1} * dt) * eps_S)
    v_k = v_{k-1} + kappa*(theta - v_{k-1})*dt + sigma*sqrt(v_{k-1} * dt) * eps_v
    eps_v = rho*eps_S + sqrt(1 - rho^2)*eps_add

with full truncation for the variance (non-negative argument inside drift
and diffusion, result clamped at zero).  The Bates extension multiplies the
post-diffusion price by exp(Z) at steps where a Bernoulli(lambda*dt) jump
indicator fires, Z ~ N(mu_j, sigma_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, PriceStepRejected, SimulationError
from .rng import Phase, StreamKey, substream

_MAX_PRICE_REJECTIONS = 100


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid: ``n_steps`` intervals of length ``dt`` covering [0, maturity]."""

    dt: float
    n_steps: int
    maturity: float

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 2:
            raise ParameterError(f"n_steps must be >= 2, got {self.n_steps}")
        if abs(self.n_steps * self.dt - self.maturity) > 1e-9 * self.maturity:
            raise ParameterError(
                f"inconsistent grid: {self.n_steps} * {self.dt} != {self.maturity}"
            )

    @classmethod
    def from_maturity(cls, maturity: float, dt: float) -> "TimeGrid":
        """Grid with n = round(maturity / dt) steps; maturity must be a multiple of dt."""
        return cls(dt=dt, n_steps=int(round(maturity / dt)), maturity=maturity)

    @classmethod
    def from_steps(cls, n_steps: int, dt: float) -> "TimeGrid":
        return cls(dt=dt, n_steps=n_steps, maturity=n_steps * dt)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class HestonParams:
    """Diffusion parameters: drift, reversion rate, long-run variance, vol-of-vol, correlation."""

    mu: float
    kappa: float
    theta: float
    sigma: float
    rho: float

    def __post_init__(self) -> None:
        # kappa = 0 / theta = 0 are legal degenerate simulations (frozen drift);
        # the operations that divide by them enforce strict positivity themselves
        if self.kappa < 0.0:
            raise ParameterError(f"kappa must be non-negative, got {self.kappa}")
        if self.theta < 0.0:
            raise ParameterError(f"theta must be non-negative, got {self.theta}")
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be non-negative, got {self.sigma}")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must be in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class JumpParams:
    """Jump intensity (per year) and log-scale jump-size law N(mu_j, sigma_j)."""

    lam: float
    mu_j: float
    sigma_j: float

    def __post_init__(self) -> None:
        if self.lam < 0.0:
            raise ParameterError(f"lambda must be non-negative, got {self.lam}")
        if self.sigma_j < 0.0:
            raise ParameterError(f"sigma_j must be non-negative, got {self.sigma_j}")


@dataclass(frozen=True)
class SimulatedPath:
    """One simulated trajectory plus its ground-truth latent state."""

    grid: TimeGrid
    prices: np.ndarray
    true_vol: np.ndarray
    jump_times: tuple[int, ...] = ()
    jump_sizes: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if np.any(self.prices <= 0.0):
            raise ParameterError("simulated prices must all be positive")
        if np.any(self.true_vol < 0.0):
            raise ParameterError("simulated volatility must be non-negative")
        if set(self.jump_sizes) != set(self.jump_times):
            raise ParameterError("jump_sizes keys must equal jump_times")


def correlate_noise(eps_s, eps_add, rho: float):
    """Mix two standard-normal series into rho*eps_s + sqrt(1 - rho^2)*eps_add."""
    eps_s = np.asarray(eps_s, dtype=float)
    eps_add = np.asarray(eps_add, dtype=float)
    if eps_s.shape != eps_add.shape:
        raise ParameterError(
            f"noise series lengths differ: {eps_s.shape} vs {eps_add.shape}"
        )
    if not -1.0 <= rho <= 1.0:
        raise ParameterError(f"rho must be in [-1, 1], got {rho}")
    return rho * eps_s + math.sqrt(1.0 - rho * rho) * eps_add


def step_volatility(v_prev: float, params: HestonParams, grid: TimeGrid, eps_v: float) -> float:
    """One full-truncation Euler step of the variance process."""
    v_plus = max(v_prev, 0.0)
    v_next = (
        v_prev
        + params.kappa * (params.theta - v_plus) * grid.dt
        + params.sigma * math.sqrt(v_plus * grid.dt) * eps_v
    )
    return max(v_next, 0.0)


def step_price(s_prev: float, v_prev: float, params: HestonParams, grid: TimeGrid, eps_s: float) -> float:
    """One Euler step of the price process.

    Raises ``PriceStepRejected`` when the multiplier 1 + mu*dt + sqrt(v*dt)*eps
    is non-positive; the simulator then redraws eps from the next substream
    value (returns must stay positive for the regression machinery).
    """
    v_plus = max(v_prev, 0.0)
    bracket = 1.0 + params.mu * grid.dt + math.sqrt(v_plus * grid.dt) * eps_s
    if bracket <= 0.0:
        raise PriceStepRejected(f"price multiplier {bracket} <= 0")
    return s_prev * bracket


def simulate_heston(
    params: HestonParams, grid: TimeGrid, s0: float, v0: float, seed: int
) -> SimulatedPath:
    """Simulate a jump-free Heston path; reproducible for a fixed seed."""
    return _simulate(params, None, grid, s0, v0, seed)


def simulate_bates(
    params: HestonParams,
    jumps: JumpParams,
    grid: TimeGrid,
    s0: float,
    v0: float,
    seed: int,
) -> SimulatedPath:
    """Simulate a Bates path: Heston diffusion plus Bernoulli(lambda*dt) jumps.

    At most one jump per step (exact thinning of the Poisson counter at grid
    resolution); the jump multiplies the post-diffusion price by exp(Z).
    Diffusion noise comes from the same substreams as ``simulate_heston``, so
    lambda = 0 reproduces the Heston path for the same seed.
    """
    if jumps.lam * grid.dt >= 1.0:
        raise ParameterError(
            f"lambda*dt = {jumps.lam * grid.dt} >= 1: grid too coarse for the jump intensity"
        )
    return _simulate(params, jumps, grid, s0, v0, seed)


def _simulate(params, jumps, grid, s0, v0, seed) -> SimulatedPath:
    if s0 <= 0.0:
        raise ParameterError(f"s0 must be positive, got {s0}")
    if v0 <= 0.0:
        raise ParameterError(f"v0 must be positive, got {v0}")
    n = grid.n_steps
    gen_s = substream(seed, StreamKey(0, Phase.SIMULATE, 0))
    gen_add = substream(seed, StreamKey(0, Phase.SIMULATE, 1))
    eps_s = gen_s.standard_normal(n)
    eps_add = gen_add.standard_normal(n)

    flags = np.zeros(n, dtype=np.int64)
    sizes = np.zeros(n)
    if jumps is not None and jumps.lam > 0.0:
        p = jumps.lam * grid.dt
        flags = (substream(seed, StreamKey(0, Phase.JUMP_FLAG, 0)).random(n) < p).astype(np.int64)
        sizes = substream(seed, StreamKey(0, Phase.JUMP_SIZE, 0)).normal(
            jumps.mu_j, jumps.sigma_j, n
        )

    prices = np.empty(n + 1)
    vol = np.empty(n + 1)
    prices[0] = s0
    vol[0] = v0
    jump_times: list[int] = []
    jump_sizes: dict[int, float] = {}

    for k in range(1, n + 1):
        e_s = eps_s[k - 1]
        for rejected in range(_MAX_PRICE_REJECTIONS + 1):
            try:
                price = step_price(prices[k - 1], vol[k - 1], params, grid, e_s)
                break
            except PriceStepRejected:
                if rejected == _MAX_PRICE_REJECTIONS:
                    raise SimulationError(
                        f"price step {k} rejected {_MAX_PRICE_REJECTIONS} times"
                    ) from None
                e_s = gen_s.standard_normal()
        # eps_v is rebuilt from the accepted price draw so the correlation survives redraws
        e_v = correlate_noise(e_s, eps_add[k - 1], params.rho)
        vol[k] = step_volatility(vol[k - 1], params, grid, float(e_v))
        if flags[k - 1]:
            price *= math.exp(sizes[k - 1])
            jump_times.append(k)
            jump_sizes[k] = float(sizes[k - 1])
        prices[k] = price

    return SimulatedPath(
        grid=grid,
        prices=prices,
        true_vol=vol,
        jump_times=tuple(jump_times),
        jump_sizes=jump_sizes,
    )
