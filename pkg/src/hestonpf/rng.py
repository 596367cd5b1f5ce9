"""Deterministic random substreams keyed by (seed, cycle, phase, unit).

Every stochastic component of the toolkit draws from its own named
substream so that runs are bit-reproducible for a fixed seed and so that
particle propagation, jump proposals, resampling and posterior draws never
contend for shared generator state.  Substreams are derived by hashing the
key into a ``numpy.random.SeedSequence``, which guarantees statistically
independent streams for distinct keys.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


class Phase(enum.IntEnum):
    """Named stream families, one per stochastic role."""

    SIMULATE = 0
    PROPAGATE = 1
    JUMP_FLAG = 2
    JUMP_SIZE = 3
    RESAMPLE = 4
    POSTERIOR_DRAW = 5


@dataclass(frozen=True)
class StreamKey:
    """Address of one substream.

    ``cycle`` indexes the sampling cycle, ``unit`` the time step or particle
    block the draws belong to.  Distinct keys yield independent streams; the
    same (seed, key) always restarts the identical draw sequence.
    """

    cycle: int
    phase: Phase
    unit: int

    def __post_init__(self) -> None:
        if self.cycle < 0 or self.unit < 0:
            raise ParameterError(f"stream key indices must be >= 0, got {self}")


def substream(seed: int, key: StreamKey) -> np.random.Generator:
    """Return the generator bound to (seed, key), freshly positioned at its start."""
    if seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed}")
    ss = np.random.SeedSequence([int(seed), int(key.cycle), int(key.phase), int(key.unit)])
    return np.random.default_rng(ss)


class Substreams:
    """Substream factory bound to one (seed, cycle) pair.

    Handed to the particle filter so each phase/time-step combination gets
    its pre-assigned stream regardless of evaluation order.
    """

    def __init__(self, seed: int, cycle: int = 0):
        self.seed = int(seed)
        self.cycle = int(cycle)

    def generator(self, phase: Phase, unit: int) -> np.random.Generator:
        return substream(self.seed, StreamKey(self.cycle, phase, unit))


def draw_standard_normal(seed: int, key: StreamKey, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. N(0, 1) variates from the keyed substream."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return substream(seed, key).standard_normal(count)


def draw_uniform(seed: int, key: StreamKey, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. uniforms on [0, 1) from the keyed substream."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return substream(seed, key).random(count)


def draw_bernoulli(seed: int, key: StreamKey, p: float, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. Bernoulli(p) flags in {0, 1}.

    Requires 0 <= p < 1; p = 1 is rejected because a certain jump at every
    step is outside the model.
    """
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"bernoulli parameter must be in [0, 1), got {p}")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return (substream(seed, key).random(count) < p).astype(np.int64)


def inverse_gamma(rng: np.random.Generator, a: float, b: float) -> float:
    """One draw from InverseGamma(a, b), density proportional to x^(-a-1) e^(-b/x).

    Implemented as the standard reduction b / Gamma(a, 1).
    """
    if a <= 0.0 or b <= 0.0:
        raise ParameterError(f"inverse-gamma parameters must be positive, got a={a}, b={b}")
    return float(b / rng.standard_gamma(a))


def draw_inverse_gamma(seed: int, key: StreamKey, a: float, b: float) -> float:
    """One InverseGamma(a, b) draw from the keyed substream."""
    return inverse_gamma(substream(seed, key), a, b)
