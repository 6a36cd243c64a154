"""Gaussian increments, bridge crossing corrections and two-particle laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import erf, erfc, ndtr

from ._kernel import bridge_hit_time, invgauss_sample
from .rng import RngStream

__all__ = [
    "NonPositiveDt",
    "PairLaw",
    "gaussian",
    "gaussians",
    "normal_cdf",
    "normal_interval",
    "bridge_cross_prob",
    "bridge_hit_time",
    "pair_survival_prob",
    "pair_meeting_time",
    "pair_meeting_times",
    "noncolliding_pair",
    "noncolliding_pairs",
    "noncolliding_pair_density",
    "invgauss_sample",
    "invgauss_samples",
]


class NonPositiveDt(ValueError):
    """A bridge needs a strictly positive time span."""


def normal_cdf(z):
    """Standard normal CDF through ``erfc`` (accurate in both tails)."""
    return ndtr(z)


def normal_interval(a, b):
    """``Phi(b) - Phi(a)`` without cancellation when both are in the same tail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = 0.5 * (erfc(a / math.sqrt(2)) - erfc(b / math.sqrt(2)))
    lower = 0.5 * (erfc(-b / math.sqrt(2)) - erfc(-a / math.sqrt(2)))
    out = np.where(a >= 0, upper, np.where(b <= 0, lower, ndtr(b) - ndtr(a)))
    return float(out) if out.ndim == 0 else out


def gaussian(stream: RngStream) -> float:
    """One standard normal variate from ``stream``."""
    return float(stream.generator.standard_normal())


def gaussians(stream: RngStream, size) -> np.ndarray:
    return stream.generator.standard_normal(size)


def bridge_cross_prob(a, b, dt):
    """Probability that the gap of two unit Brownian motions touches 0 within a step.

    The gap is a Brownian motion with variance rate 2; pinned to ``a`` and
    ``b`` at the ends of a step of length ``dt`` its minimum is below zero
    with probability ``exp(-a b / dt)``.

    Raises
    ------
    NonPositiveDt
        If ``dt <= 0``.
    """
    if not np.all(np.asarray(dt) > 0):
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    touching = (a <= 0) | (b <= 0)
    with np.errstate(over="ignore"):
        p = np.where(touching, 1.0, np.exp(-np.where(touching, 0.0, a * b) / dt))
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class PairLaw:
    """Two independent unit Brownian motions at distance ``d``, observed up to ``t``."""

    t: float
    d: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.d >= 0:
            raise ValueError("d must be non-negative")

    @property
    def survival(self) -> float:
        return pair_survival_prob(self)


def pair_survival_prob(law: PairLaw | None = None, *, t=None, d=None):
    """``P(tau > t) = 2 Phi(d / sqrt(2t)) - 1`` for two motions at distance ``d``."""
    if law is not None:
        t, d = law.t, law.d
    if not np.all(np.asarray(t) > 0):
        raise ValueError("t must be positive")
    val = erf(np.asarray(d, dtype=float) / (2.0 * np.sqrt(t)))
    return float(val) if np.ndim(val) == 0 else val


def pair_meeting_time(d: float, stream: RngStream) -> float:
    """Exact sample of the meeting time of two motions started ``d`` apart.

    The gap is a rate-2 Brownian motion, so ``tau = d**2 / (2 Z**2)``.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    z = stream.generator.standard_normal()
    return d * d / (2.0 * z * z)


def pair_meeting_times(d: float, stream: RngStream, size: int) -> np.ndarray:
    if not d > 0:
        raise ValueError("d must be positive")
    z = stream.generator.standard_normal(size)
    return d * d / (2.0 * z * z)


def noncolliding_pair(t: float, stream: RngStream) -> tuple[float, float]:
    """Exact sample of two motions started together and conditioned not to meet by ``t``.

    With ``s = (y1 + y2)/sqrt(2)`` and ``r = (y2 - y1)/sqrt(2)`` the law
    factorises into ``s ~ N(0, t)`` and a Rayleigh ``r`` with scale
    ``sqrt(t)``.
    """
    y = noncolliding_pairs(t, stream, 1)
    return float(y[0, 0]), float(y[0, 1])


def noncolliding_pairs(t: float, stream: RngStream, size: int) -> np.ndarray:
    """``size`` independent draws of :func:`noncolliding_pair` as an ``(size, 2)`` array."""
    if not t > 0:
        raise ValueError("t must be positive")
    g = stream.generator
    s = math.sqrt(t) * g.standard_normal(size)
    r = math.sqrt(t) * np.sqrt(-2.0 * np.log1p(-g.random(size)))
    y = np.empty((size, 2))
    y[:, 0] = (s - r) / math.sqrt(2.0)
    y[:, 1] = (s + r) / math.sqrt(2.0)
    return y


def noncolliding_pair_density(y1, y2, t):
    """Density ``(y2 - y1) exp(-|y|^2 / 2t) / (2 t^{3/2} sqrt(pi))`` on ``y1 < y2``."""
    if not t > 0:
        raise ValueError("t must be positive")
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    gap = y2 - y1
    val = np.where(gap > 0, gap * np.exp(-(y1 * y1 + y2 * y2) / (2.0 * t)) / (2.0 * t**1.5 * math.sqrt(math.pi)), 0.0)
    return float(val) if val.ndim == 0 else val


@njit(cache=True)
def _invgauss_many(mu, lam, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = invgauss_sample(mu, lam, rng)
    return out


def invgauss_samples(mu: float, lam: float, stream: RngStream, size: int) -> np.ndarray:
    """Inverse Gaussian variates (mean ``mu``, shape ``lam``) used for bridge hit times."""
    return _invgauss_many(float(mu), float(lam), int(size), stream.generator)
