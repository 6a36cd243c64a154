"""Point configurations, {0,1}-interface densities and entrance families.

A finite point configuration on the line (or a torus) is the state of a
system of annihilating Brownian motions.  A piecewise-constant density
``u`` with values in ``[0, 1]`` parametrises initial conditions of the
continuous-space voter model; if ``u`` is two-valued, its flip points form
a point configuration and ``u`` is recovered from them up to the swap
``u <-> 1 - u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from typing import Sequence

import numpy as np

__all__ = [
    "Line",
    "Torus",
    "LINE",
    "DiscreteConfig",
    "DensityProfile",
    "DensityClass",
    "TestFunction",
    "NotTwoValued",
    "OddCountOnTorus",
    "BadAlpha",
    "interface_of",
    "class_from_config",
    "class_equiv",
    "constant_profile",
    "indicator_profile",
    "lattice_profile",
    "entrance_family",
    "vague_pairing",
    "class_pairing_gap",
    "vague_limit_check",
    "hat_function",
]


class NotTwoValued(ValueError):
    """A profile takes a value strictly between 0 and 1."""


class OddCountOnTorus(ValueError):
    """An odd number of interfaces cannot bound an alternating coloring of a circle."""


class BadAlpha(ValueError):
    """Paired lattices need a pair offset ``1/n**alpha`` with ``alpha > 1``."""


@dataclass(frozen=True)
class Line:
    def __str__(self) -> str:
        return "line"


@dataclass(frozen=True)
class Torus:
    circumference: float

    def __post_init__(self):
        if not self.circumference > 0:
            raise ValueError(f"torus circumference must be positive, got {self.circumference}")

    def __str__(self) -> str:
        return f"torus({self.circumference})"


LINE = Line()


def _as_positions(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == object:
        # keep Fractions for exact arithmetic
        return np.array(list(arr.ravel()), dtype=object)
    return np.asarray(values, dtype=np.float64).ravel()


@dataclass(frozen=True, eq=False)
class DiscreteConfig:
    """A finite, strictly increasing set of positions.

    On a :class:`Torus` all positions lie in ``[0, L)``.
    """

    positions: np.ndarray
    domain: Line | Torus = LINE

    def __post_init__(self):
        pos = _as_positions(self.positions)
        if pos.size > 1 and not all(pos[i] < pos[i + 1] for i in range(pos.size - 1)):
            raise ValueError("positions must be strictly increasing")
        if isinstance(self.domain, Torus) and pos.size:
            if pos[0] < 0 or pos[-1] >= self.domain.circumference:
                raise ValueError("torus positions must lie in [0, L)")
        if pos.dtype != object:
            pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return int(self.positions.size)

    def __iter__(self):
        return iter(self.positions.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteConfig):
            return NotImplemented
        return self.domain == other.domain and len(self) == len(other) and all(
            a == b for a, b in zip(self.positions, other.positions)
        )

    def __repr__(self) -> str:
        return f"DiscreteConfig({list(self.positions)!r}, domain={self.domain})"

    @property
    def is_torus(self) -> bool:
        return isinstance(self.domain, Torus)


def _canonical(breakpoints, values, domain):
    """Merge adjacent intervals with equal values."""
    bps, vals = list(breakpoints), list(values)
    if isinstance(domain, Torus):
        if len(bps) <= 1:
            # one breakpoint on a circle bounds a single arc
            return (), (vals[0],)
        keep_b, keep_v = [], []
        n = len(bps)
        for i in range(n):
            # interval i is [bps[i], bps[i+1]); interval n-1 wraps to bps[0]
            prev_v = vals[i - 1]
            if vals[i] != prev_v:
                keep_b.append(bps[i])
                keep_v.append(vals[i])
        if not keep_b:
            return (), (vals[0],)
        return tuple(keep_b), tuple(keep_v)
    keep_b, keep_v = [], [vals[0]]
    for b, v in zip(bps, vals[1:]):
        if v != keep_v[-1]:
            keep_b.append(b)
            keep_v.append(v)
    return tuple(keep_b), tuple(keep_v)


@dataclass(frozen=True)
class DensityProfile:
    """Piecewise-constant density with values in ``[0, 1]``.

    On the line ``values[0]`` is the value on ``(-inf, breakpoints[0])`` and
    ``values[-1]`` the value on ``[breakpoints[-1], inf)``, so there is one
    more value than breakpoints.  On a torus ``values[i]`` holds on
    ``[breakpoints[i], breakpoints[i+1])`` with the last arc wrapping around;
    a constant torus profile has no breakpoints and a single value.
    Construction merges equal neighbours, so equal profiles compare equal.
    """

    breakpoints: tuple
    values: tuple
    domain: Line | Torus = LINE

    def __post_init__(self):
        bps = tuple(self.breakpoints)
        vals = tuple(self.values)
        torus = isinstance(self.domain, Torus)
        expected = max(len(bps), 1) if torus else len(bps) + 1
        if len(vals) != expected:
            raise ValueError(f"expected {expected} values for {len(bps)} breakpoints, got {len(vals)}")
        if any(not (0 <= v <= 1) for v in vals):
            raise ValueError("profile values must lie in [0, 1]")
        if any(not bps[i] < bps[i + 1] for i in range(len(bps) - 1)):
            raise ValueError("breakpoints must be strictly increasing")
        if torus and bps and (bps[0] < 0 or bps[-1] >= self.domain.circumference):
            raise ValueError("torus breakpoints must lie in [0, L)")
        bps, vals = _canonical(bps, vals, self.domain)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @property
    def is_two_valued(self) -> bool:
        return all(v == 0 or v == 1 for v in self.values)

    def complement(self) -> "DensityProfile":
        return DensityProfile(self.breakpoints, tuple(1 - v for v in self.values), self.domain)

    def __call__(self, x):
        """Evaluate the right-continuous version of the profile at ``x``."""
        vals = np.asarray(self.values, dtype=float)
        xs = np.asarray(x, dtype=float)
        if not self.breakpoints:
            out = np.full(xs.shape, vals[0])
        else:
            bps = np.asarray(self.breakpoints, dtype=float)
            if isinstance(self.domain, Torus):
                xs = np.mod(xs, self.domain.circumference)
                idx = np.searchsorted(bps, xs, side="right") - 1  # -1 wraps to last arc
                out = vals[idx]
            else:
                out = vals[np.searchsorted(bps, xs, side="right")]
        return float(out) if np.ndim(x) == 0 else out

    def value_at(self, x) -> Real:
        """Exact (non-vectorised) evaluation, preserving Fraction values."""
        bps = self.breakpoints
        if isinstance(self.domain, Torus):
            if not bps:
                return self.values[0]
            x = x % self.domain.circumference
            i = int(np.searchsorted(np.asarray(bps, dtype=float), float(x), side="right")) - 1
            return self.values[i]
        i = int(np.searchsorted(np.asarray(bps, dtype=float), float(x), side="right"))
        return self.values[i]

    def to_dict(self) -> dict:
        dom = "line" if isinstance(self.domain, Line) else {"torus": self.domain.circumference}
        return {
            "domain": dom,
            "breakpoints": [float(b) for b in self.breakpoints],
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DensityProfile":
        dom = data.get("domain", "line")
        domain = LINE if dom == "line" else Torus(float(dom["torus"]))
        return cls(tuple(data["breakpoints"]), tuple(data["values"]), domain)


def constant_profile(value, domain: Line | Torus = LINE) -> DensityProfile:
    return DensityProfile((), (value,), domain)


def indicator_profile(a, b) -> DensityProfile:
    """Indicator of ``[a, b)``; infinite endpoints give half-lines."""
    if a == -math.inf and b == math.inf:
        return constant_profile(1)
    if a == -math.inf:
        return DensityProfile((b,), (1, 0))
    if b == math.inf:
        return DensityProfile((a,), (0, 1))
    return DensityProfile((a, b), (0, 1, 0))


@dataclass(frozen=True)
class DensityClass:
    """The pair ``{u, 1 - u}``, stored through a canonical representative.

    The representative is whichever of ``u`` and ``1 - u`` has the
    lexicographically smaller value sequence: a two-valued profile is
    represented with leftmost value 0 and a constant ``lam`` by
    ``min(lam, 1 - lam)``.
    """

    representative: DensityProfile

    def __post_init__(self):
        u = self.representative
        c = u.complement()
        if tuple(c.values) < tuple(u.values):
            object.__setattr__(self, "representative", c)

    @property
    def members(self) -> tuple[DensityProfile, DensityProfile]:
        return self.representative, self.representative.complement()

    def __eq__(self, other) -> bool:
        # 1 - (1 - v) need not equal v in floating point, so values match to 1e-12
        if not isinstance(other, DensityClass):
            return NotImplemented
        u = self.representative
        return any(
            v.domain == u.domain and v.breakpoints == u.breakpoints
            and np.allclose(np.asarray(v.values, float), np.asarray(u.values, float), rtol=0, atol=1e-12)
            for v in other.members
        )

    __hash__ = None


def class_equiv(u: DensityProfile, v: DensityProfile) -> bool:
    return DensityClass(u) == DensityClass(v)


def interface_of(u: DensityProfile) -> DiscreteConfig:
    """Flip points of a two-valued profile.

    Raises
    ------
    NotTwoValued
        If some interval value lies strictly inside ``(0, 1)``.
    """
    if not u.is_two_valued:
        raise NotTwoValued(f"profile has values strictly between 0 and 1: {u.values}")
    # canonical form already merged equal neighbours, so every breakpoint flips
    return DiscreteConfig(list(u.breakpoints) if u.breakpoints else np.empty(0), u.domain)


def class_from_config(x: DiscreteConfig, left_value: int) -> DensityProfile:
    """Alternating {0,1} profile flipping at every point of ``x``.

    ``left_value`` is the value left of the first point (on a torus: on the
    arc just before ``positions[0]``, which contains position 0 unless a
    point sits exactly there).
    """
    if left_value not in (0, 1):
        raise ValueError("left_value must be 0 or 1")
    pos = list(x.positions)
    n = len(pos)
    if x.is_torus:
        if n % 2:
            raise OddCountOnTorus(f"{n} interfaces on a torus")
        if n == 0:
            return DensityProfile((), (left_value,), x.domain)
        vals = tuple((1 - left_value) if i % 2 == 0 else left_value for i in range(n))
        return DensityProfile(tuple(pos), vals, x.domain)
    vals = tuple(left_value if i % 2 == 0 else 1 - left_value for i in range(n + 1))
    return DensityProfile(tuple(pos), vals, x.domain)


def lattice_profile(u: DensityProfile, mesh, window) -> DensityProfile:
    """Two-valued approximant of ``u`` on a lattice of cells of width ``mesh``.

    Every interval where ``u`` equals some ``lam`` in ``(0, 1)`` is filled
    with the pattern ``1 on [k*mesh, (k + lam)*mesh), 0 elsewhere`` (cells
    aligned to the global grid ``mesh * Z``); {0,1}-valued intervals are
    copied.  Unbounded intervals with fractional value are truncated to
    ``window`` and set to 0 outside it.  As ``mesh -> 0`` the result
    converges vaguely to ``u``.
    """
    if isinstance(u.domain, Torus):
        raise NotImplementedError("lattice approximants are built on the line")
    lo_w, hi_w = window
    edges = [-math.inf, *u.breakpoints, math.inf]
    pieces: list[tuple[float, float, int]] = []  # (start, end, value) covering the line
    for a, b, lam in zip(edges[:-1], edges[1:], u.values):
        if lam == 0 or lam == 1:
            pieces.append((a, b, int(lam)))
            continue
        a_w, b_w = max(a, lo_w), min(b, hi_w)
        if a < a_w:
            pieces.append((a, a_w, 0))
        if a_w < b_w:
            k0 = math.floor(a_w / mesh)
            k1 = math.ceil(b_w / mesh)
            cur = a_w
            for k in range(k0, k1):
                one_lo = max(k * mesh, a_w)
                one_hi = min((k + lam) * mesh, b_w)
                if one_lo < one_hi:
                    if cur < one_lo:
                        pieces.append((cur, one_lo, 0))
                    pieces.append((one_lo, one_hi, 1))
                    cur = one_hi
            if cur < b_w:
                pieces.append((cur, b_w, 0))
        if b_w < b:
            pieces.append((max(b_w, a), b, 0))
    bps = [p[0] for p in pieces[1:]]
    vals = [p[2] for p in pieces]
    # drop zero-length pieces created by clipping
    keep_b, keep_v = [], [vals[0]]
    for bp, v, prev in zip(bps, vals[1:], bps[:1] + bps[:-1]):
        if keep_b and bp <= keep_b[-1]:
            keep_v[-1] = v
            continue
        keep_b.append(bp)
        keep_v.append(v)
    return DensityProfile(tuple(keep_b), tuple(keep_v))


def _window_range(offset, n, window):
    """Integers k with ``(k + offset) / n`` inside the closed window."""
    lo, hi = window
    tol = 1e-12 * max(1.0, abs(float(lo)), abs(float(hi)))
    k_lo = math.ceil(float(lo) * n - float(offset) - tol * n)
    k_hi = math.floor(float(hi) * n - float(offset) + tol * n)
    return range(k_lo, k_hi + 1)


def entrance_family(kind: str, n: int, window, *, alpha: float = 2.0, stream=None, exact: bool = False) -> DiscreteConfig:
    """Increasingly dense initial configurations restricted to ``window``.

    ``kind`` is one of ``"lattice"`` (``Z/n``), ``"paired"``
    (``Z/n + {0, n**-alpha}``), ``"quarter"`` (``Z/n + {0, 1/(4n)}``) or
    ``"poisson"`` (rate-``n`` Poisson points, needs ``stream``).  With
    ``exact=True`` deterministic families are returned as Fractions.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = window
    if not lo < hi:
        raise ValueError("window must be a bounded interval lo < hi")
    kind = kind.lower()
    if kind == "poisson":
        if stream is None:
            raise ValueError("the poisson family needs a random stream")
        g = stream.generator
        count = g.poisson(n * (hi - lo))
        pts = np.sort(g.uniform(lo, hi, size=count))
        return DiscreteConfig(pts)
    if kind == "lattice":
        offsets = [0]
    elif kind == "quarter":
        offsets = [0, Fraction(1, 4)]
    elif kind == "paired":
        if not alpha > 1:
            raise BadAlpha(f"alpha must exceed 1, got {alpha}")
        a_int = float(alpha).is_integer()
        # offset measured in units of 1/n: n**-alpha = (n**(1-alpha)) / n
        offsets = [0, Fraction(1, n ** (int(alpha) - 1)) if a_int else n ** (1.0 - alpha)]
    else:
        raise ValueError(f"unknown entrance family {kind!r}")
    pts = set()
    for off in offsets:
        for k in _window_range(off, n, window):
            if exact:
                if isinstance(off, float):
                    raise ValueError("exact positions need an integer alpha")
                pts.add(Fraction(k) / n + Fraction(off) / n)
            else:
                pts.add((k + float(off)) / n)
    ordered = sorted(pts)
    if exact:
        return DiscreteConfig(np.array(ordered, dtype=object))
    return DiscreteConfig(np.array(ordered, dtype=float))


def _div(a, b):
    # stay exact when both operands are rational
    if isinstance(a, Rational) and isinstance(b, Rational):
        return Fraction(a) / b
    return a / b


@dataclass(frozen=True)
class TestFunction:
    """Continuous, compactly supported, piecewise-linear function.

    Given by nodes ``(x_k, phi_k)``; it is linear between nodes and zero
    outside ``[x_0, x_last]``, so the end values must be zero.
    """

    __test__ = False  # not a pytest class

    nodes: tuple
    heights: tuple

    def __post_init__(self):
        xs, ys = tuple(self.nodes), tuple(self.heights)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("need at least two nodes with one height each")
        if any(not xs[i] < xs[i + 1] for i in range(len(xs) - 1)):
            raise ValueError("nodes must be strictly increasing")
        if ys[0] != 0 or ys[-1] != 0:
            raise ValueError("a compactly supported continuous function vanishes at its end nodes")
        object.__setattr__(self, "nodes", xs)
        object.__setattr__(self, "heights", ys)

    def __call__(self, x):
        return np.interp(x, np.asarray(self.nodes, float), np.asarray(self.heights, float), left=0.0, right=0.0)

    def integral(self):
        xs, ys = self.nodes, self.heights
        return sum(_div((xs[i + 1] - xs[i]) * (ys[i] + ys[i + 1]), 2) for i in range(len(xs) - 1))


def hat_function(center=0, half_width=1, height=1) -> TestFunction:
    return TestFunction((center - half_width, center, center + half_width), (0, height, 0))


def vague_pairing(u: DensityProfile, phi: TestFunction):
    """Exact ``integral of u * phi`` (Fractions in, Fraction out)."""
    xs, ys = phi.nodes, phi.heights
    if isinstance(u.domain, Torus):
        raise NotImplementedError("pairings are defined on the line")
    cuts = sorted(set(xs) | {b for b in u.breakpoints if xs[0] < b < xs[-1]})

    def phi_at(z):
        # linear interpolation without leaving exact arithmetic
        for i in range(len(xs) - 1):
            if xs[i] <= z <= xs[i + 1]:
                return ys[i] + _div((ys[i + 1] - ys[i]) * (z - xs[i]), xs[i + 1] - xs[i])
        return 0

    bps = u.breakpoints
    total = 0
    j = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        while j < len(bps) and bps[j] <= a:
            j += 1
        total += _div(u.values[j] * (phi_at(a) + phi_at(b)) * (b - a), 2)
    return total


def class_pairing_gap(u: DensityProfile, phi: TestFunction, lam):
    """``min`` over the two class members of ``|<v, phi> - lam * integral(phi)|``."""
    p = vague_pairing(u, phi)
    total = phi.integral()
    target = lam * total
    return min(abs(p - target), abs((total - p) - target))


@dataclass
class VagueLimitReport:
    kind: str
    limit: float
    ns: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    tolerance: float | None = None

    @property
    def final_gap(self):
        return self.gaps[-1]

    @property
    def passed(self) -> bool:
        return self.tolerance is None or self.final_gap <= self.tolerance

    def rows(self):
        return [{"kind": self.kind, "n": n, "limit": self.limit, "gap": float(g)} for n, g in zip(self.ns, self.gaps)]


def vague_limit_check(kind: str, phi: TestFunction, lam, n_sequence: Sequence[int], *, alpha: float = 2,
                      margin=1, tolerance=None, exact: bool = True) -> VagueLimitReport:
    """Pairing gaps of a deterministic entrance family against ``lam * integral(phi)``.

    The configuration is generated on ``support(phi)`` widened by ``margin``
    on both sides, turned into an alternating profile and paired exactly.
    """
    ns = list(n_sequence)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_sequence must be increasing")
    lo = phi.nodes[0] - margin
    hi = phi.nodes[-1] + margin
    report = VagueLimitReport(kind, float(lam), tolerance=tolerance)
    use_exact = exact and (kind != "paired" or float(alpha).is_integer())
    for n in ns:
        x = entrance_family(kind, n, (lo, hi), alpha=alpha, exact=use_exact)
        u = class_from_config(x, 0)
        gap = class_pairing_gap(u, phi, Fraction(lam).limit_denominator() if use_exact else lam)
        report.ns.append(n)
        report.gaps.append(gap)
    return report
