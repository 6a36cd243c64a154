"""Monte Carlo estimates, two-sample verdicts and replica fan-out."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .rng import RngStream, stream_id_for

__all__ = [
    "EstimateWithCI",
    "Verdict",
    "verdict",
    "run_replicas",
    "replica_streams",
    "extrapolation_weights",
    "extrapolate",
    "chi2_two_sample",
    "chi2_goodness_of_fit",
]


@dataclass(frozen=True)
class EstimateWithCI:
    """Sample mean with standard error ``std(ddof=1) / sqrt(replicas)``."""

    mean: float
    std_error: float
    replicas: int
    root_seed: int | None = None
    experiment: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_samples(cls, samples, root_seed=None, experiment=None, **extra) -> "EstimateWithCI":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("no samples")
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(float(np.mean(x)), se, int(x.size), root_seed, experiment, dict(extra))

    @classmethod
    def exact(cls, value: float, replicas: int = 1, **kw) -> "EstimateWithCI":
        return cls(float(value), 0.0, int(replicas), **kw)

    def scaled(self, factor: float) -> "EstimateWithCI":
        return EstimateWithCI(self.mean * factor, self.std_error * abs(factor), self.replicas,
                              self.root_seed, self.experiment, dict(self.extra))

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.mean - k * self.std_error, self.mean + k * self.std_error

    def covers(self, value: float, k: float = 3.0) -> bool:
        lo, hi = self.interval(k)
        return lo <= value <= hi

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.std_error, "n": self.replicas}


@dataclass(frozen=True)
class Verdict:
    a: EstimateWithCI
    b: EstimateWithCI
    z: float
    alpha: float
    passed: bool

    def to_dict(self) -> dict:
        return {"lhs": self.a.to_dict(), "rhs": self.b.to_dict(), "z": self.z, "alpha": self.alpha,
                "pass": self.passed}

    def __bool__(self) -> bool:
        return self.passed


def verdict(a: EstimateWithCI, b: EstimateWithCI, alpha: float = 0.01, comparisons: int = 1) -> Verdict:
    """Two-sided z-test of ``a.mean == b.mean`` with pooled standard error.

    ``comparisons > 1`` applies a Bonferroni correction.  With zero pooled
    standard error the test passes only on exact equality.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    level = alpha / max(1, int(comparisons))
    diff = a.mean - b.mean
    se = math.hypot(a.std_error, b.std_error)
    if se == 0:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return Verdict(a, b, z, level, diff == 0)
    z = diff / se
    crit = stats.norm.isf(level / 2)
    return Verdict(a, b, z, level, abs(z) <= crit)


def replica_streams(root_seed: int, experiment: str, replicas: int) -> list[RngStream]:
    return [RngStream(root_seed, stream_id_for(experiment, r)) for r in range(replicas)]


def run_replicas(fn: Callable[[RngStream], object], replicas: int, experiment: str, root_seed: int,
                 threads: int = 1) -> list:
    """Evaluate ``fn`` on one fresh stream per replica, results in replica order.

    Replica ``r`` always receives the stream keyed by ``(root_seed,
    stream_id_for(experiment, r))``, so the output does not depend on
    ``threads``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    streams = replica_streams(root_seed, experiment, replicas)
    if threads <= 1:
        return [fn(s) for s in streams]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, streams))


def extrapolation_weights(eps: Sequence[float]) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f(eps))`` the least-squares intercept of a line in ``eps``."""
    e = np.asarray(eps, dtype=float)
    if e.size == 1:
        return np.ones(1)
    design = np.column_stack([np.ones_like(e), e])
    return np.linalg.pinv(design)[0]


def extrapolate(per_eps: Sequence[EstimateWithCI], eps: Sequence[float], samples: np.ndarray | None = None,
                **provenance) -> EstimateWithCI:
    """Linear extrapolation to ``eps = 0``.

    If ``samples`` (shape ``(replicas, len(eps))``) come from shared runs,
    the weights are applied per replica so correlations enter the standard
    error; otherwise the per-epsilon estimates are treated as independent.
    """
    w = extrapolation_weights(eps)
    if samples is not None:
        comb = np.asarray(samples, dtype=float) @ w
        return EstimateWithCI.from_samples(comb, **provenance)
    mean = float(sum(wi * e.mean for wi, e in zip(w, per_eps)))
    se = float(math.sqrt(sum((wi * e.std_error) ** 2 for wi, e in zip(w, per_eps))))
    n = min(e.replicas for e in per_eps)
    return EstimateWithCI(mean, se, n, **provenance)


def _merge_sparse(table: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """Merge adjacent columns until every expected count reaches ``min_expected``."""
    cols = [table[:, k].astype(float) for k in range(table.shape[1])]
    total = table.sum()
    rows = table.sum(axis=1)

    def ok(c):
        return np.all(np.outer(rows, [c.sum()]).ravel() / total >= min_expected)

    merged = []
    acc = None
    for c in cols:
        acc = c if acc is None else acc + c
        if ok(acc):
            merged.append(acc)
            acc = None
    if acc is not None:
        if merged:
            merged[-1] = merged[-1] + acc
        else:
            merged.append(acc)
    return np.column_stack(merged)


def chi2_two_sample(a: Sequence[int], b: Sequence[int], min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square test that two integer samples share a distribution.

    Returns ``(statistic, p_value, dof)`` after merging sparse bins.
    """
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    ca = np.bincount(a - lo, minlength=hi - lo + 1)
    cb = np.bincount(b - lo, minlength=hi - lo + 1)
    table = np.vstack([ca, cb])
    table = table[:, table.sum(axis=0) > 0]
    table = _merge_sparse(table, min_expected)
    if table.shape[1] < 2:
        return 0.0, 1.0, 0
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), float(p), int(dof)


def chi2_goodness_of_fit(observed: Sequence[float], expected: Sequence[float], ddof: int = 0,
                         min_expected: float = 5.0) -> tuple[float, float, int]:
    """Pearson goodness of fit, merging neighbouring bins with small expectation."""
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    exp = exp * obs.sum() / exp.sum()
    o_m, e_m = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            o_m.append(acc_o)
            e_m.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if e_m:
            o_m[-1] += acc_o
            e_m[-1] += acc_e
        else:
            o_m.append(acc_o)
            e_m.append(acc_e)
    o_m = np.asarray(o_m)
    e_m = np.asarray(e_m)
    stat, p = stats.chisquare(o_m, e_m, ddof=ddof)
    return float(stat), float(p), int(o_m.size - 1 - ddof)
