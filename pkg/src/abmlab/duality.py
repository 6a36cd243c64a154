"""Two independent Monte Carlo routes for each duality identity.

The forward side runs the voter model (or its annihilating interfaces)
from the initial profile; the dual side runs coalescing motions backwards
from the query points and evaluates the profile at the cluster endpoints.
Profiles with fractional values enter the forward side only through
two-valued lattice approximants, so the two routes share no code path
beyond the particle kernel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .configurations import DensityProfile, DiscreteConfig, interface_of, lattice_profile
from .estimates import EstimateWithCI, run_replicas
from .particles import StepScheme, abm_run, cbm_run, count_in
from .rng import RngStream
from .stochastic import pair_survival_prob
from .voter import voter_marginal_marks, voter_run_interface

__all__ = [
    "Identity",
    "DualityQuery",
    "lhs_moment",
    "rhs_moment",
    "lhs_parity",
    "rhs_match",
    "closed_form_match",
    "closed_form_moment",
]

DEFAULT_MARGIN = 6.0
MESH_DIVISOR = 64


class Identity(str, enum.Enum):
    MOMENT = "MOMENT"
    MATCH = "MATCH"
    BORDER = "BORDER"
    PARITY = "PARITY"


@dataclass(frozen=True)
class DualityQuery:
    """Profile, time and query points for one duality comparison.

    ``mesh`` is the lattice spacing used when a fractional profile must be
    started as a two-valued configuration (default: the smallest query gap,
    or ``sqrt(t)`` for a single point, divided by 64).  ``margin`` widens
    the simulated window by ``margin * sqrt(t)`` around the query points.
    """

    profile: DensityProfile
    t: float
    points: tuple
    identity: Identity = Identity.MOMENT
    mesh: float | None = None
    margin: float = DEFAULT_MARGIN
    scheme: StepScheme = field(default_factory=StepScheme)

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "identity", Identity(self.identity))
        if not self.t > 0:
            raise ValueError("t must be positive")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("query points must be strictly increasing")
        if self.identity in (Identity.MATCH, Identity.BORDER, Identity.PARITY) and len(pts) % 2:
            raise ValueError("pairwise identities need an even number of points")

    @property
    def effective_mesh(self) -> float:
        if self.mesh is not None:
            return float(self.mesh)
        gaps = np.diff(self.points)
        base = float(gaps.min()) if gaps.size else math.sqrt(self.t)
        return base / MESH_DIVISOR

    @property
    def window(self) -> tuple[float, float]:
        pad = self.margin * math.sqrt(self.t)
        return self.points[0] - pad, self.points[-1] + pad

    def forward_start(self) -> tuple[DensityProfile, float | None]:
        """Two-valued initial profile for the forward route and the mesh used (if any)."""
        if self.profile.is_two_valued:
            return self.profile, None
        h = self.effective_mesh
        return lattice_profile(self.profile, h, self.window), h

    def to_dict(self) -> dict:
        return {
            "identity": self.identity.value,
            "profile": self.profile.to_dict(),
            "t": self.t,
            "points": list(self.points),
            "mesh": self.effective_mesh if not self.profile.is_two_valued else None,
        }


def _experiment(stream: RngStream, label: str) -> str:
    return f"{label}:{stream.stream_id:016x}"


def _estimate(fn, q: DualityQuery, stream: RngStream, replicas: int, label: str, threads: int, **extra):
    exp = _experiment(stream, label)
    vals = run_replicas(fn, replicas, exp, stream.root_seed, threads)
    return EstimateWithCI.from_samples(vals, root_seed=stream.root_seed, experiment=exp, **extra)


def lhs_moment(q: DualityQuery, stream: RngStream, replicas: int, threads: int = 1) -> EstimateWithCI:
    """Forward estimate of ``E[prod_i u_t(x_i)]`` from the interface construction."""
    start, h = q.forward_start()
    xs = np.asarray(q.points)

    def one(s: RngStream) -> float:
        state = voter_run_interface(start, q.t, q.scheme, s)[-1]
        return float(np.prod(state(xs)))

    return _estimate(one, q, stream, replicas, "lhs_moment", threads, mesh=h)


def rhs_moment(q: DualityQuery, stream: RngStream, replicas: int, threads: int = 1) -> EstimateWithCI:
    """Dual estimate of ``E[prod_{y in Y_t} u(y)]`` over coalescing cluster endpoints."""
    u = q.profile
    x0 = DiscreteConfig(np.asarray(q.points), u.domain)

    def one(s: RngStream) -> float:
        state = cbm_run(x0, q.t, q.scheme, s)[-1]
        return float(np.prod(u(state.positions)))

    return _estimate(one, q, stream, replicas, "rhs_moment", threads)


def lhs_parity(q: DualityQuery, stream: RngStream, replicas: int, threads: int = 1) -> EstimateWithCI:
    """Forward probability that every ``[x_{2i-1}, x_{2i}]`` holds an even number of particles."""
    start, h = q.forward_start()
    x0 = interface_of(start)
    pairs = list(zip(q.points[0::2], q.points[1::2]))

    def one(s: RngStream) -> float:
        state = abm_run(x0, q.t, q.scheme, s)[-1] if len(x0) else None
        if state is None:
            return 1.0
        return float(all(count_in(state, ab) % 2 == 0 for ab in pairs))

    return _estimate(one, q, stream, replicas, "lhs_parity", threads, mesh=h)


def _conditional_match(u: DensityProfile, positions, cluster_of) -> float:
    # marks of distinct clusters are independent; tie each pair's clusters
    # together and require every connected group to carry a common mark
    k = len(positions)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in zip(cluster_of[0::2], cluster_of[1::2]):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    p = np.asarray(u(positions), dtype=float)
    groups: dict[int, list[int]] = {}
    for c in range(k):
        groups.setdefault(find(c), []).append(c)
    out = 1.0
    for members in groups.values():
        if len(members) > 1:
            out *= float(np.prod(p[members]) + np.prod(1 - p[members]))
    return out


def rhs_match(q: DualityQuery, stream: RngStream, replicas: int, threads: int = 1,
              path: str = "marks") -> EstimateWithCI:
    """Dual probability that the marks at ``x_{2i-1}`` and ``x_{2i}`` agree for every ``i``.

    ``path`` selects the evaluation: ``"marks"`` samples the Bernoulli
    marks; ``"direct"`` (two-valued profiles only) compares ``u`` at the
    cluster endpoints; ``"conditional"`` averages the exact conditional
    probability given the cluster endpoints.
    """
    u = q.profile
    xs = np.asarray(q.points)
    if path == "direct" and not u.is_two_valued:
        raise ValueError("the direct path needs a two-valued profile")
    if path not in ("marks", "direct", "conditional"):
        raise ValueError(f"unknown path {path!r}")

    def one(s: RngStream) -> float:
        if path == "marks":
            _, bits = voter_marginal_marks(u, q.t, xs, s, q.scheme)
            return float(np.all(bits[0::2] == bits[1::2]))
        state = cbm_run(DiscreteConfig(xs, u.domain), q.t, q.scheme, s)[-1]
        cl = state.block_of()
        if path == "direct":
            vals = np.asarray(u(state.positions))[cl]
            return float(np.all(vals[0::2] == vals[1::2]))
        return _conditional_match(u, np.asarray(state.positions), cl)

    return _estimate(one, q, stream, replicas, f"rhs_match_{path}", threads)


def closed_form_match(lam: float, d: float, t: float) -> float:
    """Match probability for a constant profile and one pair at distance ``d``."""
    c = 1.0 - pair_survival_prob(t=t, d=d)
    return c + (1 - c) * (lam**2 + (1 - lam) ** 2)


def closed_form_moment(lam: float, d: float, t: float) -> float:
    """Second moment ``E[u_t(x) u_t(x + d)]`` for a constant profile."""
    c = 1.0 - pair_survival_prob(t=t, d=d)
    return lam * c + lam**2 * (1 - c)
