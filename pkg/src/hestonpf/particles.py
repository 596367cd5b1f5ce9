"""SIR particle filtering of the latent volatility with continuous-CDF resampling.

The filter propagates a cloud of variance particles through the Euler
dynamics, weights each candidate by how well it explains the observed
return, and resamples.  Resampling does not draw from the discrete
weighted cloud: the sorted particle values become the knots of a
piecewise-linear CDF whose segment masses blend neighbouring weights
(half of each inner weight on both adjacent segments, full outer weights
on the edge segments), and new particles are drawn from that continuous
distribution by inverse-transform sampling.  Resampled values therefore
interpolate between the raw ones instead of duplicating them.

With jumps enabled, each particle also carries a Bernoulli jump flag and a
normal jump size; the weight switches to the jump branch of the
observation density, the per-step jump probability is the weighted flagged
mass, and the jump sizes are resampled through their own sorted CDF.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .bayes import PriorConfig, ReturnSeries
from .errors import DegenerateWeightsError, DomainError, ParameterError
from .rng import Phase, Substreams
from .sde import HestonParams

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ParticleCloud:
    """Particle values with normalized weights, optionally jump flags/sizes."""

    values: np.ndarray
    weights: np.ndarray
    jump_flags: np.ndarray | None = None
    jump_sizes: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.values.size
        if self.weights.size != n:
            raise ParameterError("weights and values must have equal length")
        for name in ("jump_flags", "jump_sizes"):
            arr = getattr(self, name)
            if arr is not None and arr.size != n:
                raise ParameterError(f"{name} must have length {n}")

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FilterOutput:
    """Volatility estimate per grid point plus, with jumps, the per-step traces."""

    vol_estimate: np.ndarray
    jump_prob: np.ndarray | None = None
    jump_size: np.ndarray | None = None


@dataclass(frozen=True)
class PiecewiseLinearCDF:
    """Continuous CDF over sorted particle values.

    ``knots_x`` are the sorted values, ``knots_f`` the CDF there:
    F(x_0) = 0, F(x_j) = sum_{m<j} w_m + w_j/2 for inner knots, F(x_{N-1}) = 1.
    Duplicate values produce zero-width segments (a CDF jump); the inverse
    returns the shared value for any u landing in the jump.
    """

    knots_x: np.ndarray
    knots_f: np.ndarray

    def evaluate(self, v) -> np.ndarray:
        """F(v), vectorized; 0 at/left of the minimum, 1 at/right of the maximum."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        x, f = self.knots_x, self.knots_f
        out = np.zeros(v.shape)
        out[v >= x[-1]] = 1.0
        inner = (v > x[0]) & (v < x[-1])
        i = np.searchsorted(x, v[inner], side="right") - 1
        width = x[i + 1] - x[i]
        frac = np.zeros(i.shape)
        pos = width > 0.0
        frac[pos] = (v[inner][pos] - x[i][pos]) / width[pos]
        out[inner] = f[i] + frac * (f[i + 1] - f[i])
        return out

    def inverse(self, u) -> np.ndarray:
        """Inverse-transform sample: the v with F(v) = u, for u in [0, 1).

        Zero-width segments (duplicate particle values) are CDF jumps and map
        the whole jump mass to the shared value; zero-mass segments are flat
        stretches that no u < 1 lands strictly inside.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if ((u < 0.0) | (u >= 1.0)).any():
            raise ParameterError("u must lie in [0, 1)")
        return np.interp(u, self.knots_f, self.knots_x)


def init_particles(theta_i: float, n_particles: int) -> ParticleCloud:
    """All particles start at the current long-run variance with uniform weights."""
    if theta_i <= 0.0:
        raise ParameterError(f"initial particle value must be positive, got {theta_i}")
    if n_particles < 2:
        raise ParameterError(f"need at least two particles, got {n_particles}")
    return ParticleCloud(
        values=np.full(n_particles, float(theta_i)),
        weights=np.full(n_particles, 1.0 / n_particles),
    )


def propagate(
    cloud: ParticleCloud,
    returns_k: float,
    params: HestonParams,
    dt: float,
    rng: np.random.Generator,
) -> ParticleCloud:
    """Propagate each particle one Euler step, conditioning on the observed return.

    z_j = (R_k - mu*dt - 1) / sqrt(V_j dt) recovers the price-equation shock,
    w_j = z_j*rho + eps_j*sqrt(1 - rho^2) carries the correlation into the
    variance update, and the candidate is truncated at zero from below.
    """
    v = cloud.values
    if np.any(v <= 0.0):
        raise DomainError("particles must be strictly positive before propagation")
    eps = rng.standard_normal(v.size)
    z = (returns_k - params.mu * dt - 1.0) / (np.sqrt(dt) * np.sqrt(v))
    w = z * params.rho + eps * math.sqrt(1.0 - params.rho**2)
    v_new = v + params.kappa * (params.theta - v) * dt + params.sigma * np.sqrt(dt * v) * w
    return ParticleCloud(
        values=np.maximum(v_new, 0.0),
        weights=cloud.weights,
        jump_flags=cloud.jump_flags,
        jump_sizes=cloud.jump_sizes,
    )


def _log_weight_nojump(values: np.ndarray, r_obs: float, mu_i: float, dt: float) -> np.ndarray:
    # zero-truncated particles get log-weight -inf (they cannot explain any return)
    out = np.full(values.shape, -np.inf)
    pos = values > 0.0
    var = values[pos] * dt
    res = r_obs - mu_i * dt - 1.0
    out[pos] = -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * res * res / var
    return out


def _log_weight_jump(
    values: np.ndarray,
    flags: np.ndarray,
    sizes: np.ndarray,
    r_obs: float,
    mu_i: float,
    dt: float,
) -> np.ndarray:
    out = _log_weight_nojump(values, r_obs, mu_i, dt)
    jumped = (flags == 1) & (values > 0.0)
    if np.any(jumped):
        var = values[jumped] * dt
        z = sizes[jumped]
        res = r_obs - np.exp(z) * (mu_i * dt + 1.0)
        out[jumped] = -z - 0.5 * (_LOG_2PI + np.log(var)) - 0.5 * res * res / (np.exp(2.0 * z) * var)
    return out


def weight_nojump(values, returns_next: float, mu_i: float, dt: float) -> np.ndarray:
    """Observation density of the next return under each candidate variance.

    W_j = (2 pi V_j dt)^(-1/2) exp(-(R - mu*dt - 1)^2 / (2 V_j dt)); particles
    truncated to zero receive weight 0.
    """
    return np.exp(_log_weight_nojump(np.asarray(values, dtype=float), returns_next, mu_i, dt))


def weight_jump(values, jump_flags, jump_sizes, returns_k: float, mu_i: float, dt: float) -> np.ndarray:
    """Observation density with the jump branch.

    Flagged particles use mean exp(Z)(mu*dt + 1), variance exp(2Z) V_j dt and
    the leading 1/exp(Z) factor; unflagged ones reduce exactly to the no-jump
    density at the same return.
    """
    values = np.asarray(values, dtype=float)
    flags = np.asarray(jump_flags)
    sizes = np.asarray(jump_sizes, dtype=float)
    if flags.size != values.size or sizes.size != values.size:
        raise ParameterError("jump flags/sizes must match the particle count")
    return np.exp(_log_weight_jump(values, flags, sizes, returns_k, mu_i, dt))


def normalize(raw) -> np.ndarray:
    """Rescale non-negative weights to unit sum."""
    raw = np.asarray(raw, dtype=float)
    if np.any(raw < 0.0):
        raise ParameterError("weights must be non-negative")
    total = raw.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("all particle weights are zero")
    return raw / total


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    # max-subtraction before exponentiation keeps small V*dt from underflowing everything
    m = logw.max()
    if not np.isfinite(m):
        raise DegenerateWeightsError("all particle log-weights are -inf")
    w = np.exp(logw - m)
    return w / w.sum()


def build_cdf(values, weights) -> PiecewiseLinearCDF:
    """Sort the cloud and build the continuous resampling CDF.

    Segment masses: first segment W_1 + W_2/2, inner segment j
    W_j/2 + W_{j+1}/2, last segment W_{N-1}/2 + W_N; they telescope to 1.
    Ties are broken by original index (stable sort); duplicate values yield
    zero-width segments.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = values.size
    if n < 3:
        raise ParameterError(f"continuous-CDF resampling needs at least 3 particles, got {n}")
    if weights.size != n:
        raise ParameterError("weights and values must have equal length")
    order = values.argsort(kind="stable")
    x = values[order]
    w = weights[order]
    f = np.empty(n)
    f[0] = 0.0
    cum = np.cumsum(w)
    f[1:-1] = cum[:-2] + 0.5 * w[1:-1]
    f[-1] = 1.0
    return PiecewiseLinearCDF(knots_x=x, knots_f=f)


def sample_cdf(cdf: PiecewiseLinearCDF, u):
    """Inverse-transform draw(s) from the piecewise-linear CDF."""
    out = cdf.inverse(u)
    return float(out[0]) if np.isscalar(u) else out


def resample(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    """Draw a fresh cloud of N values by inverse transform, one uniform each.

    When jump sizes are present they are resampled through their own sorted
    CDF.  Output weights are uniform.
    """
    n = cloud.size
    cdf = build_cdf(cloud.values, cloud.weights)
    values = cdf.inverse(rng.random(n))
    sizes = None
    if cloud.jump_sizes is not None:
        zcdf = build_cdf(cloud.jump_sizes, cloud.weights)
        sizes = zcdf.inverse(rng.random(n))
    return ParticleCloud(
        values=values,
        weights=np.full(n, 1.0 / n),
        jump_sizes=sizes,
    )


def estimate_vol(clouds, v0: float, n_steps: int) -> np.ndarray:
    """Per-step particle means, assembled into the (n+1)-long volatility estimate.

    ``clouds`` covers steps 1..n-1 (no-jump variant, terminal value copied
    because the weight needs the next return) or 1..n (jump variant, no copy).
    """
    means = [float(np.mean(np.asarray(c))) for c in clouds]
    if len(means) == n_steps - 1:
        means.append(means[-1])
    elif len(means) != n_steps:
        raise ParameterError(
            f"expected {n_steps - 1} or {n_steps} per-step clouds, got {len(means)}"
        )
    return np.concatenate([[float(v0)], means])


def init_jump_particles(
    lambda_th: float,
    mu0_j: float,
    sigma0_j: float,
    n_particles: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw jump flags ~ Bernoulli(lambda_th) and sizes ~ N(mu0_j, sigma0_j)."""
    if not 0.0 <= lambda_th < 1.0:
        raise ParameterError(f"lambda_th must be in [0, 1), got {lambda_th}")
    flags = (rng.random(n_particles) < lambda_th).astype(np.int64)
    sizes = rng.normal(mu0_j, sigma0_j, n_particles)
    return flags, sizes


def step_jump_prob(flags, weights) -> float:
    """Weighted mass of jump-flagged particles, in [0, 1]."""
    flags = np.asarray(flags)
    weights = np.asarray(weights, dtype=float)
    if flags.size != weights.size:
        raise ParameterError("flags and weights must have equal length")
    # unit-sum weights can overshoot 1 by a few ulp; keep the result a probability
    return float(min(max(weights[flags == 1].sum(), 0.0), 1.0))


def aggregate_jump_params(
    jump_prob,
    jump_size,
    maturity: float,
    n_steps: int,
    prior_mu_j: float,
    prior_sigma_j: float,
) -> tuple[float, float, float]:
    """Aggregate the per-step traces into (lambda_i, mu_j_i, sigma_j_i).

    lambda_i is the time average of the jump probabilities; the jump-size
    moments are weighted by them, the variance carrying the (n-1)/n factor.
    With zero total jump mass the moments are undefined and the prior
    (mu_j, sigma_j) is returned with lambda_i = 0.
    """
    lam_t = np.asarray(jump_prob, dtype=float)
    z_t = np.asarray(jump_size, dtype=float)
    if lam_t.size != z_t.size:
        raise ParameterError("jump traces must have equal length")
    if np.any((lam_t < 0.0) | (lam_t > 1.0 + 1e-9)):
        raise ParameterError("jump probabilities must lie in [0, 1]")
    lam_t = np.minimum(lam_t, 1.0)
    lam_i = float(lam_t.sum() / maturity)
    total = float(lam_t.sum())
    if total <= 0.0:
        logger.warning("no jump mass detected; returning prior jump-size moments")
        return 0.0, prior_mu_j, prior_sigma_j
    mu_j = float((z_t * lam_t).sum() / total)
    num = float((lam_t * (z_t - mu_j) ** 2).sum())
    if num == 0.0:
        return lam_i, mu_j, 0.0
    sigma_j = math.sqrt(num / ((n_steps - 1) / n_steps * total))
    return lam_i, mu_j, sigma_j


def neutralize_returns(returns, jump_prob, jump_size) -> np.ndarray:
    """Cancel detected jumps: R'_k = R_k * (1 - lambda_k * (1 - exp(-Z_k))).

    The factor is ~1 where lambda is ~0 and ~exp(-Z) where lambda is ~1,
    which removes the jump exactly.  Corrected values that fall to/below
    zero (pathological lambda/Z combinations) are clamped to 1e-12.
    """
    r = np.asarray(returns, dtype=float)
    lam_t = np.asarray(jump_prob, dtype=float)
    z_t = np.asarray(jump_size, dtype=float)
    if r.size != lam_t.size or r.size != z_t.size:
        raise ParameterError("returns and jump traces must have equal length")
    corrected = r * (1.0 - lam_t * (1.0 - np.exp(-z_t)))
    bad = corrected <= 0.0
    if np.any(bad):
        logger.warning("neutralized return(s) <= 0 at %d step(s); clamping", int(bad.sum()))
        corrected = np.where(bad, 1e-12, corrected)
    return corrected


def run_filter(
    returns: ReturnSeries,
    params: HestonParams,
    priors: PriorConfig,
    with_jumps: bool,
    streams: Substreams,
    propagation_returns: ReturnSeries | None = None,
) -> FilterOutput:
    """One full filtering pass over the return series.

    Without jumps the loop covers steps 1..n-1, each candidate being weighted
    against the *next* return (the step-n weight would need R_{n+1}); the
    terminal estimate copies its predecessor.  With jumps the loop covers
    1..n and weights against the same step's return, so no copy is needed.
    Degenerate weights at a step fall back to uniform with a diagnostic.

    ``propagation_returns`` feeds only the propagation residual z.  Jump
    detection needs the raw returns in the weights, but a raw jump entering
    z would shove every variance particle through the correlation term and
    destabilise the vol-of-vol estimate; the calibrator therefore passes the
    previous cycle's jump-neutralized series here (the diffusion shock the
    variance equation actually couples to).  Defaults to ``returns``.
    """
    r = returns.values
    dt = returns.dt
    n = r.size
    if n < 2:
        raise ParameterError("need at least two returns to filter")
    r_prop = returns.values if propagation_returns is None else propagation_returns.values
    if r_prop.size != n:
        raise ParameterError("propagation returns must match the observed returns in length")
    n_p = priors.n_particles
    cloud = init_particles(params.theta, n_p)
    values = cloud.values

    last_step = n if with_jumps else n - 1
    step_means: list[float] = []
    lam_trace: list[float] = []
    z_trace: list[float] = []
    degenerate_steps = 0

    for k in range(1, last_step + 1):
        r_k = r[k - 1]
        flags = sizes = None
        if with_jumps:
            # separate streams so flag draws never shift the size draws
            flags = (
                streams.generator(Phase.JUMP_FLAG, k).random(n_p) < priors.lambda_th
            ).astype(np.int64)
            sizes = streams.generator(Phase.JUMP_SIZE, k).normal(
                priors.mu0_j, priors.sigma0_j, n_p
            )

        cand = propagate(
            ParticleCloud(values=values, weights=cloud.weights, jump_flags=flags, jump_sizes=sizes),
            r_prop[k - 1],
            params,
            dt,
            streams.generator(Phase.PROPAGATE, k),
        )

        if with_jumps:
            logw = _log_weight_jump(cand.values, flags, sizes, r_k, params.mu, dt)
        else:
            logw = _log_weight_nojump(cand.values, r[k], params.mu, dt)
        try:
            weights = _normalize_log(logw)
        except DegenerateWeightsError:
            degenerate_steps += 1
            weights = np.full(n_p, 1.0 / n_p)

        if with_jumps:
            lam_trace.append(step_jump_prob(flags, weights))

        refined = resample(
            ParticleCloud(values=cand.values, weights=weights, jump_sizes=sizes),
            streams.generator(Phase.RESAMPLE, k),
        )
        values = refined.values
        step_means.append(float(values.mean()))
        if with_jumps:
            # Size trace: mean size among the jump-declaring mass.  The plain
            # resampled-cloud mean echoes the prior (~mu0_j) wherever no jump
            # was detected; paired with the small false-positive lambda mass it
            # would drift every neutralized return upward.  Conditioning on the
            # flags reports the size of the jump the step actually detected and
            # coincides with the cloud mean at real jumps, where flagged
            # particles carry all the weight.
            flagged_mass = float((weights * flags).sum())
            if flagged_mass > 0.0:
                z_trace.append(float((weights * flags * sizes).sum() / flagged_mass))
            else:
                z_trace.append(float(refined.jump_sizes.mean()))

    if degenerate_steps:
        logger.warning(
            "particle weights degenerated at %d step(s); uniform fallback used", degenerate_steps
        )

    vol = estimate_vol(step_means, params.theta, n)
    if with_jumps:
        return FilterOutput(
            vol_estimate=vol,
            jump_prob=np.asarray(lam_trace),
            jump_size=np.asarray(z_trace),
        )
    return FilterOutput(vol_estimate=vol)
