"""Conjugate Bayesian posteriors for the static model parameters.

Given a (known or filtered) volatility path, each parameter block reduces to
a standard conjugate update:

* drift block: R_k = eta + sqrt(v_{k-1} dt) eps becomes a scalar normal
  regression in eta = mu*dt + 1 after dividing by sqrt(v_{k-1} dt);
* volatility block: v_k = beta_1 + beta_2 v_{k-1} + sigma sqrt(v_{k-1} dt) eps
  becomes a 2-column normal regression in beta = (kappa*theta*dt, 1 - kappa*dt),
  with an inverse-gamma update for sigma^2;
* correlation block: the price and volatility residuals satisfy
  e2 = psi e1 + sqrt(omega) eps with psi = sigma*rho, omega = sigma^2 (1 - rho^2),
  giving normal/inverse-gamma updates and rho = psi / sqrt(psi^2 + omega).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDrawError,
    DomainError,
    NumericError,
    ParameterError,
    SingularDesignError,
)
from .rng import inverse_gamma
from .sde import HestonParams

logger = logging.getLogger(__name__)

# |kappa| below this floor (in 1/dt units) makes theta = beta_1/(kappa*dt) meaningless
KAPPA_FLOOR_DT = 1e-8


@dataclass(frozen=True)
class ReturnSeries:
    """Ratios of consecutive prices R_k = S_k / S_{k-1}, all positive."""

    values: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.dt <= 0.0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.values.ndim != 1 or self.values.size == 0:
            raise ParameterError("return series must be a non-empty 1-d array")
        if np.any(self.values <= 0.0):
            raise DomainError("return series must be strictly positive")

    @classmethod
    def from_prices(cls, prices, dt: float) -> "ReturnSeries":
        prices = np.asarray(prices, dtype=float)
        if prices.ndim != 1 or prices.size < 2:
            raise ParameterError("need at least two prices to form returns")
        if np.any(prices <= 0.0):
            raise DomainError("prices must be strictly positive")
        return cls(values=prices[1:] / prices[:-1], dt=dt)


@dataclass(frozen=True)
class VolPath:
    """A strictly positive volatility path v_0 .. v_n (it divides everywhere)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 2:
            raise ParameterError("volatility path must hold at least two values")
        if np.any(self.values <= 0.0):
            raise DomainError("volatility path must be strictly positive")


@dataclass(frozen=True)
class PriorConfig:
    """Every prior metaparameter plus the run controls.

    Defaults are the exemplary-estimation priors: eta ~ N(1.00125, 0.001),
    beta ~ N((35e-6, 0.988), diag(10, 5)^-1 scaled), sigma^2 ~ IG(149, 0.025),
    psi ~ N(-0.45, 0.3), omega ~ IG(1.03, 0.05), jump ratio 0.15 and jump-size
    prior N(-0.96, 0.3).
    """

    mu0_eta: float = 1.00125
    tau0_eta: float = 1.0 / 0.001**2
    mu0_beta: tuple[float, float] = (35e-6, 0.988)
    lambda0_beta: tuple[tuple[float, float], tuple[float, float]] = ((10.0, 0.0), (0.0, 5.0))
    a0_sigma: float = 149.0
    b0_sigma: float = 0.025
    mu0_psi: float = -0.45
    tau0_psi: float = 1.0 / 0.3**2
    a0_omega: float = 1.03
    b0_omega: float = 0.05
    lambda_th: float = 0.15
    mu0_j: float = -0.96
    sigma0_j: float = 0.3
    n_samples: int = 500
    n_particles: int = 1000
    pf_fraction: float = 1.0
    mu_init: float | None = None
    kappa_init: float | None = None
    theta_init: float | None = None
    sigma_init: float | None = None
    rho_init: float | None = None

    def __post_init__(self) -> None:
        if self.tau0_eta < 0.0 or self.tau0_psi < 0.0:
            raise ParameterError("prior precisions must be non-negative")
        lam0 = self.lambda0_beta_matrix()
        if not np.allclose(lam0, lam0.T):
            raise ParameterError("lambda0_beta must be symmetric")
        if np.any(np.linalg.eigvalsh(lam0) < -1e-12):
            raise ParameterError("lambda0_beta must be positive semidefinite")
        for name in ("a0_sigma", "b0_sigma", "a0_omega", "b0_omega"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be positive")
        if not 0.0 <= self.lambda_th < 1.0:
            raise ParameterError(f"lambda_th must be in [0, 1), got {self.lambda_th}")
        if self.sigma0_j < 0.0:
            raise ParameterError("sigma0_j must be non-negative")
        if self.n_samples < 1:
            raise ParameterError("n_samples must be >= 1")
        if self.n_particles < 2:
            raise ParameterError("n_particles must be >= 2")
        if not 0.0 < self.pf_fraction <= 1.0:
            raise ParameterError(f"pf_fraction must be in (0, 1], got {self.pf_fraction}")

    def mu0_beta_vector(self) -> np.ndarray:
        return np.asarray(self.mu0_beta, dtype=float)

    def lambda0_beta_matrix(self) -> np.ndarray:
        return np.asarray(self.lambda0_beta, dtype=float)

    def initial_values(self, dt: float) -> dict[str, float]:
        """Starting parameter values for cycle 0.

        Explicit ``*_init`` fields win; otherwise the prior means are mapped
        through the inverse transforms (eta -> mu, beta -> kappa/theta,
        IG mean -> sigma, psi/omega means -> rho).
        """
        if dt <= 0.0:
            raise ParameterError(f"dt must be positive, got {dt}")
        mu = self.mu_init if self.mu_init is not None else (self.mu0_eta - 1.0) / dt
        if self.kappa_init is not None:
            kappa = self.kappa_init
        else:
            kappa = (1.0 - self.mu0_beta[1]) / dt
        if kappa <= 0.0:
            raise ParameterError(
                "prior beta mean implies kappa <= 0; supply kappa_init explicitly"
            )
        if self.theta_init is not None:
            theta = self.theta_init
        else:
            theta = self.mu0_beta[0] / (kappa * dt)
        if theta <= 0.0:
            raise ParameterError(
                "prior beta mean implies theta <= 0; supply theta_init explicitly"
            )
        if self.sigma_init is not None:
            sigma = self.sigma_init
        else:
            if self.a0_sigma <= 1.0:
                raise ParameterError(
                    "a0_sigma <= 1 has no prior mean; supply sigma_init explicitly"
                )
            sigma = math.sqrt(self.b0_sigma / (self.a0_sigma - 1.0))
        if self.rho_init is not None:
            rho = self.rho_init
        else:
            if self.a0_omega <= 1.0:
                raise ParameterError(
                    "a0_omega <= 1 has no prior mean; supply rho_init explicitly"
                )
            omega0 = self.b0_omega / (self.a0_omega - 1.0)
            rho = rho_from_psi_omega(self.mu0_psi, omega0)
        return {"mu": mu, "kappa": kappa, "theta": theta, "sigma": sigma, "rho": rho}

    def initial_heston(self, dt: float) -> HestonParams:
        return HestonParams(**self.initial_values(dt))


@dataclass(frozen=True)
class RegressionDraw:
    """One cycle's draws from the conjugate posteriors."""

    eta: float
    beta: np.ndarray
    sigma2: float
    psi: float
    omega: float

    def __post_init__(self) -> None:
        if self.sigma2 <= 0.0:
            raise ParameterError("sigma2 must be positive")
        if self.omega <= 0.0:
            raise ParameterError("omega must be positive")


def _check_vol(vol: np.ndarray) -> np.ndarray:
    vol = np.asarray(vol, dtype=float)
    if np.any(vol <= 0.0):
        raise DomainError("volatility path must be strictly positive")
    return vol


def build_eta_design(returns, vol, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Design of the drift regression: y_k = R_k / sqrt(v_{k-1} dt), x_k = 1 / sqrt(v_{k-1} dt).

    ``returns`` holds R_1..R_n and ``vol`` holds v_0..v_n (only v_0..v_{n-1}
    enter).  All x are positive by construction.
    """
    r = np.asarray(returns, dtype=float)
    vol = _check_vol(vol)
    if vol.size < r.size:
        raise ParameterError("volatility path shorter than the return series")
    scale = 1.0 / (np.sqrt(vol[: r.size]) * math.sqrt(dt))
    return r * scale, scale.copy()


def posterior_scalar_normal(y, x, mu0: float, tau0: float) -> tuple[float, float]:
    """Posterior (mean, precision) of a scalar coefficient with a normal prior.

    tau_post = x'x + tau0, mu_post = (tau0*mu0 + x'y) / tau_post; the x'y form
    and the textbook x'x * OLS form are algebraically identical.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if tau0 < 0.0:
        raise ParameterError("prior precision must be non-negative")
    xx = float(x @ x)
    if xx <= 0.0:
        raise SingularDesignError("x'x = 0: scalar design is singular")
    tau_post = xx + tau0
    mu_post = (tau0 * mu0 + float(x @ y)) / tau_post
    return mu_post, tau_post


def sample_eta(mu: float, tau: float, rng: np.random.Generator) -> float:
    """One draw from N(mu, 1/sqrt(tau))."""
    if tau <= 0.0:
        raise ParameterError("posterior precision must be positive")
    return float(rng.normal(mu, 1.0 / math.sqrt(tau)))


def eta_to_mu(eta: float, dt: float) -> float:
    """Invert eta = mu*dt + 1."""
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    return (eta - 1.0) / dt


def build_beta_design(vol, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Design of the volatility regression, rows k = 2..n.

    y_k = v_k / sqrt(v_{k-1} dt); columns 1 / sqrt(v_{k-1} dt) and
    sqrt(v_{k-1}) / sqrt(dt).  The first transition (v_0 -> v_1) is dropped
    because v_0 is the deterministic filter initialisation.
    """
    vol = _check_vol(vol)
    if vol.size < 3:
        raise ParameterError("volatility path must hold at least three values")
    sq = np.sqrt(vol) / math.sqrt(dt)  # sqrt(v/dt)
    prev = vol[1:-1]
    y = vol[2:] / (np.sqrt(prev) * math.sqrt(dt))
    x1 = 1.0 / (np.sqrt(prev) * math.sqrt(dt))
    x2 = sq[1:-1]
    return y, np.column_stack([x1, x2])


def posterior_beta(y, X, mu0, lambda0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Posterior of the 2-vector beta: Lambda = X'X + Lambda0, mu = Lambda^-1 (Lambda0 mu0 + X'y).

    Returns (mu_beta, lambda_beta, beta_hat).  When X'X is singular the
    identity X'X beta_hat = X'y is substituted directly (the posterior mean
    never needs an explicit OLS solve); beta_hat is then the minimum-norm
    least-squares solution.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    lambda0 = np.asarray(lambda0, dtype=float)
    xtx = X.T @ X
    xty = X.T @ y
    lam = xtx + lambda0
    try:
        mu = np.linalg.solve(lam, lambda0 @ mu0 + xty)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("posterior precision matrix is singular") from exc
    try:
        beta_hat = np.linalg.solve(xtx, xty)
    except np.linalg.LinAlgError:
        beta_hat = np.linalg.lstsq(X, y, rcond=None)[0]
    return mu, lam, beta_hat


def sample_beta(mu_beta, lambda_beta, sigma2_prev: float, rng: np.random.Generator) -> np.ndarray:
    """Draw beta ~ N(mu_beta, sigma2_prev * lambda_beta^-1).

    ``sigma2_prev`` is the previous cycle's sigma^2 realisation.  The draw
    uses the Cholesky factor of the inverse precision.
    """
    if sigma2_prev <= 0.0:
        raise ParameterError("sigma2_prev must be positive")
    mu_beta = np.asarray(mu_beta, dtype=float)
    lambda_beta = np.asarray(lambda_beta, dtype=float)
    try:
        cov = sigma2_prev * np.linalg.inv(lambda_beta)
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError("posterior precision is not positive definite") from exc
    return mu_beta + chol @ rng.standard_normal(mu_beta.size)


def beta_to_kappa_theta(beta, dt: float) -> tuple[float, float]:
    """Invert beta_1 = kappa*theta*dt, beta_2 = 1 - kappa*dt.

    Raises ``DegenerateDrawError`` when |kappa| < 1e-8/dt (theta undefined);
    the caller redraws with bounded retries.
    """
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    beta = np.asarray(beta, dtype=float)
    kappa = (1.0 - float(beta[1])) / dt
    if abs(kappa) < KAPPA_FLOOR_DT / dt:
        raise DegenerateDrawError(f"kappa = {kappa} below the degeneracy floor")
    theta = float(beta[0]) / (kappa * dt)
    return kappa, theta


def posterior_sigma2(y, mu0, lambda0, mu_beta, lambda_beta, a0: float, b0: float, n_obs: int) -> tuple[float, float]:
    """Inverse-gamma posterior of sigma^2: a = a0 + n/2, b = b0 + (y'y + mu0'L0 mu0 - mu'L mu)/2.

    Floating-point cancellation can push b marginally negative; it is then
    clamped to b0 * 1e-6 with a diagnostic instead of aborting the chain.
    """
    if a0 <= 0.0 or b0 <= 0.0:
        raise ParameterError("inverse-gamma prior parameters must be positive")
    y = np.asarray(y, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    lambda0 = np.asarray(lambda0, dtype=float)
    mu_beta = np.asarray(mu_beta, dtype=float)
    lambda_beta = np.asarray(lambda_beta, dtype=float)
    a = a0 + 0.5 * n_obs
    b = b0 + 0.5 * (float(y @ y) + float(mu0 @ lambda0 @ mu0) - float(mu_beta @ lambda_beta @ mu_beta))
    if b <= 0.0:
        logger.warning("sigma^2 posterior scale %.3e <= 0; clamping to %.3e", b, b0 * 1e-6)
        b = b0 * 1e-6
    return a, b


def sample_sigma2(
    y,
    mu0,
    lambda0,
    mu_beta,
    lambda_beta,
    a0: float,
    b0: float,
    n_obs: int,
    rng: np.random.Generator,
) -> float:
    """One draw of sigma^2 from its inverse-gamma posterior."""
    a, b = posterior_sigma2(y, mu0, lambda0, mu_beta, lambda_beta, a0, b0, n_obs)
    return inverse_gamma(rng, a, b)


def compute_residuals(returns, vol, mu_i: float, kappa_i: float, theta_i: float, dt: float):
    """Residuals of the price and volatility equations, k = 1..n.

    e1_k = (R_k - mu*dt - 1) / sqrt(v_{k-1} dt)
    e2_k = (v_k - v_{k-1} - kappa*(theta - v_{k-1})*dt) / sqrt(v_{k-1} dt)
    """
    r = np.asarray(returns, dtype=float)
    vol = _check_vol(vol)
    n = r.size
    if vol.size < n + 1:
        raise ParameterError("volatility path must hold one more value than the returns")
    prev = vol[:n]
    denom = np.sqrt(prev) * math.sqrt(dt)
    e1 = (r - mu_i * dt - 1.0) / denom
    e2 = (vol[1 : n + 1] - prev - kappa_i * (theta_i - prev) * dt) / denom
    return e1, e2


def posterior_psi_omega(
    e1, e2, mu0_psi: float, tau0_psi: float, a0_omega: float, b0_omega: float
) -> tuple[float, float, float, float]:
    """Posteriors of psi and omega from the residual cross-moments.

    With A = [e1 e2]'[e1 e2]:  mu_psi = (A12 + mu0*tau0)/(A11 + tau0),
    tau_psi = A11 + tau0, a_omega = a0 + n/2, b_omega = b0 + (A22 - A12^2/A11)/2.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape:
        raise ParameterError("residual series must have equal length")
    a11 = float(e1 @ e1)
    a12 = float(e1 @ e2)
    a22 = float(e2 @ e2)
    if a11 <= 0.0:
        raise SingularDesignError("price residuals are identically zero")
    mu_psi = (a12 + mu0_psi * tau0_psi) / (a11 + tau0_psi)
    tau_psi = a11 + tau0_psi
    a_omega = a0_omega + 0.5 * e1.size
    b_omega = b0_omega + 0.5 * (a22 - a12 * a12 / a11)
    return mu_psi, tau_psi, a_omega, b_omega


def rho_from_psi_omega(psi: float, omega: float) -> float:
    """Map (psi, omega) to rho = psi / sqrt(psi^2 + omega); |rho| < 1 whenever omega > 0."""
    if omega <= 0.0:
        raise ParameterError("omega must be positive")
    return psi / math.sqrt(psi * psi + omega)


def sample_rho(
    mu_psi: float, tau_psi: float, a_omega: float, b_omega: float, rng: np.random.Generator
) -> tuple[float, float, float]:
    """Draw omega, then psi ~ N(mu_psi, sqrt(omega/tau_psi)), and map to rho."""
    if tau_psi <= 0.0:
        raise ParameterError("tau_psi must be positive")
    omega = inverse_gamma(rng, a_omega, b_omega)
    psi = float(rng.normal(mu_psi, math.sqrt(omega / tau_psi)))
    return rho_from_psi_omega(psi, omega), psi, omega
