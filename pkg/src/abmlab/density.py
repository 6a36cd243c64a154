"""One- and n-point densities of annihilating systems started from a class ``[u]``.

Monte Carlo routes:

* :func:`density_mc` runs the annihilating interfaces of a two-valued
  (lattice-approximated) start and counts windows ``[x_i - eps, x_i + eps]``
  that contain a particle.
* :func:`density_n_dual_mc` and :func:`density_maximal_mc` run coalescing
  motions from ``x_i -+ eps`` and use Bernoulli marks, respectively plain
  separation, of the paired motions.
* :func:`q_estimate` and :func:`thinned_density_formula` work with
  independent motions conditioned not to collide.

Every route evaluates a sequence of half-widths and extrapolates linearly
to ``eps = 0``.  :func:`density1_quadrature` evaluates the one-point
density by quadrature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .configurations import DensityProfile, DiscreteConfig, Line, interface_of, lattice_profile
from .estimates import EstimateWithCI, extrapolate, run_replicas
from .particles import StepScheme, abm_run, cbm_run, thin_parts
from .rng import RngStream
from .stochastic import noncolliding_pairs, normal_interval
from .voter import match_indicator

__all__ = [
    "QuadratureNotConverged",
    "DensityQuery",
    "DensityResult",
    "homogeneous_density",
    "gaussian_density",
    "density_mc",
    "density1_quadrature",
    "density_n_dual_mc",
    "density_maximal_mc",
    "q_estimate",
    "thinned_density_mc",
    "thinned_density_formula",
]

DEFAULT_MARGIN = 6.0
REJECTION_CAP = 10**7


class QuadratureNotConverged(RuntimeError):
    """The adaptive quadrature did not reach the requested tolerance."""


def homogeneous_density(lam: float, t: float) -> float:
    """One-point density ``2 lam (1 - lam) / sqrt(pi t)`` of the class ``[lam]``."""
    return 2.0 * lam * (1.0 - lam) / math.sqrt(math.pi * t)


def gaussian_density(x, t: float):
    """One-point density of a single motion started at 0."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DensityQuery:
    """Density evaluation request.

    Parameters
    ----------
    profile : DensityProfile
        Any representative of the class.
    t : float
        Observation time.
    points : tuple of float
        Strictly increasing positions ``x_1 < ... < x_n``.
    eps : tuple of float, optional
        Half-widths for the extrapolation.  Default ``eps0 * (1, 1/2, 1/4)``
        with ``eps0 = 0.4 sqrt(t)``, shrunk below half the smallest gap.
    mesh : float, optional
        Lattice spacing used to start fractional profiles (default ``sqrt(t)/32``).
    margin : float
        Simulated window extends ``margin * sqrt(t)`` beyond the points,
        unless ``window`` is given.
    """

    profile: DensityProfile
    t: float
    points: tuple
    eps: tuple | None = None
    mesh: float | None = None
    margin: float = DEFAULT_MARGIN
    window: tuple | None = None
    scheme: StepScheme = field(default_factory=StepScheme)

    def __post_init__(self):
        pts = tuple(float(p) for p in np.atleast_1d(self.points))
        object.__setattr__(self, "points", pts)
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not pts:
            raise ValueError("at least one point is needed")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("points must be strictly increasing")
        if self.eps is None:
            e0 = 0.4 * math.sqrt(self.t)
            if len(pts) > 1:
                e0 = min(e0, 0.45 * float(np.min(np.diff(pts))))
            eps = (e0, e0 / 2, e0 / 4)
        else:
            eps = tuple(float(e) for e in np.atleast_1d(self.eps))
        if any(e <= 0 for e in eps):
            raise ValueError("half-widths must be positive")
        if len(pts) > 1 and max(eps) >= 0.5 * float(np.min(np.diff(pts))):
            raise ValueError("half-widths must stay below half the smallest gap")
        object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def sim_window(self) -> tuple[float, float]:
        if self.window is not None:
            return tuple(self.window)
        pad = self.margin * math.sqrt(self.t) + max(self.eps)
        return self.points[0] - pad, self.points[-1] + pad

    @property
    def effective_mesh(self) -> float:
        return float(self.mesh) if self.mesh is not None else math.sqrt(self.t) / 32

    def start_config(self) -> tuple[DiscreteConfig, float | None]:
        """Initial annihilating configuration and the lattice mesh (if one was needed)."""
        u = self.profile
        if u.is_two_valued:
            return interface_of(u), None
        h = self.effective_mesh
        return interface_of(lattice_profile(u, h, self.sim_window)), h


@dataclass(frozen=True)
class DensityResult:
    """Per-half-width estimates and the extrapolated value."""

    route: str
    eps: tuple
    per_eps: tuple
    extrapolated: EstimateWithCI
    info: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return self.extrapolated.mean

    @property
    def std_error(self) -> float:
        return self.extrapolated.std_error

    def rows(self, query: DensityQuery) -> list[dict]:
        xs = ";".join(format(p, ".17g") for p in query.points)
        out = [{"x": xs, "t": query.t, "epsilon": e, "estimate": est.mean, "std_error": est.std_error,
                "replicas": est.replicas, "route": self.route} for e, est in zip(self.eps, self.per_eps)]
        ex = self.extrapolated
        out.append({"x": xs, "t": query.t, "epsilon": 0.0, "estimate": ex.mean, "std_error": ex.std_error,
                    "replicas": ex.replicas, "route": self.route})
        return out


def _label(stream: RngStream, name: str) -> str:
    return f"{name}:{stream.stream_id:016x}"


def _shared_result(route, q, samples, stream, label, **info) -> DensityResult:
    samples = np.asarray(samples, dtype=float)
    prov = dict(root_seed=stream.root_seed, experiment=label)
    per = tuple(EstimateWithCI.from_samples(samples[:, k], **prov) for k in range(samples.shape[1]))
    return DensityResult(route, q.eps, per, extrapolate(per, q.eps, samples, **prov), info)


def _independent_result(route, q, per, stream, label, **info) -> DensityResult:
    prov = dict(root_seed=stream.root_seed, experiment=label)
    return DensityResult(route, q.eps, tuple(per), extrapolate(per, q.eps, **prov), info)


def _window_hits(pos: np.ndarray, points, eps) -> np.ndarray:
    """``out[k]`` = 1 if every window ``[x_i - eps_k, x_i + eps_k]`` holds a point."""
    pos = np.asarray(pos)
    out = np.empty(len(eps))
    for k, e in enumerate(eps):
        ok = True
        for x in points:
            lo = np.searchsorted(pos, x - e, side="left")
            hi = np.searchsorted(pos, x + e, side="right")
            if hi <= lo:
                ok = False
                break
        out[k] = ok
    return out


def density_mc(q: DensityQuery, stream: RngStream, replicas: int, threads: int = 1) -> DensityResult:
    """Forward estimate of ``(2 eps)^-n P(every window holds a particle)``.

    All half-widths are read off the same runs, and the extrapolation is
    formed replica by replica.
    """
    x0, h = q.start_config()
    scale = np.array([(2 * e) ** -q.n for e in q.eps])
    label = _label(stream, "density_mc")
    if len(x0) == 0:
        samples = np.zeros((replicas, len(q.eps)))
    else:
        def one(s: RngStream):
            state = abm_run(x0, q.t, q.scheme, s)[-1]
            return _window_hits(state.positions, q.points, q.eps) * scale

        samples = np.array(run_replicas(one, replicas, label, stream.root_seed, threads))
    return _shared_result("abm", q, samples, stream, label, mesh=h, initial_particles=len(x0))


def thinned_density_mc(q: DensityQuery, stream: RngStream, replicas: int, threads: int = 1) -> DensityResult:
    """Forward estimate for the thinned system: each run keeps one alternating half."""
    x0, h = q.start_config()
    scale = np.array([(2 * e) ** -q.n for e in q.eps])
    label = _label(stream, "thinned_density_mc")
    if len(x0) == 0:
        samples = np.zeros((replicas, len(q.eps)))
    else:
        def one(s: RngStream):
            pos = abm_run(x0, q.t, q.scheme, s)[-1].positions
            first, second = thin_parts(pos)
            kept = first if s.generator.random() < 0.5 else second
            return _window_hits(kept, q.points, q.eps) * scale

        samples = np.array(run_replicas(one, replicas, label, stream.root_seed, threads))
    return _shared_result("abm_thinned", q, samples, stream, label, mesh=h, initial_particles=len(x0))


def _dual_points(points, e) -> np.ndarray:
    return np.array([v for x in points for v in (x - e, x + e)])


def _differ_probability(p: np.ndarray, cluster_of: np.ndarray) -> float:
    """P(marks of the two motions around every point differ), given the clusters."""
    k = p.size
    left = cluster_of[0::2]
    right = cluster_of[1::2]
    if np.any(left == right):
        return 0.0
    total = 0.0
    for bits in itertools.product((0, 1), repeat=k):
        b = np.array(bits)
        if np.all(b[left] != b[right]):
            total += float(np.prod(np.where(b == 1, p, 1 - p)))
    return total


def _dual_scheme(q: DensityQuery) -> StepScheme:
    # two motions are resolved exactly by the bridge test, so a coarse grid suffices
    if q.scheme.dt is not None:
        return q.scheme
    return StepScheme(q.t / 256, q.scheme.bridge_correction)


def density_n_dual_mc(q: DensityQuery, stream: RngStream, replicas: int, threads: int = 1,
                      conditional: bool = False) -> DensityResult:
    """Dual estimate of ``(2 eps)^-n P(marks at x_i - eps and x_i + eps differ for all i)``.

    With ``conditional=True`` the mark indicator is replaced by its exact
    conditional probability given the coalescing clusters.
    """
    u = q.profile
    scheme = _dual_scheme(q)
    per = []
    for k, e in enumerate(q.eps):
        pts = _dual_points(q.points, e)
        x0 = DiscreteConfig(pts, u.domain)
        label = _label(stream, f"density_dual:{k}")

        def one(s: RngStream, x0=x0):
            state = cbm_run(x0, q.t, scheme, s)[-1]
            cl = state.block_of()
            p = np.asarray(u(state.positions), dtype=float)
            if conditional:
                return _differ_probability(p, cl)
            marks = (s.generator.random(len(state)) < p).astype(int)
            bits = marks[cl]
            return float(np.all(bits[0::2] != bits[1::2]))

        vals = np.array(run_replicas(one, replicas, label, stream.root_seed, threads)) * (2 * e) ** -q.n
        per.append(EstimateWithCI.from_samples(vals, root_seed=stream.root_seed, experiment=label))
    return _independent_result("dual_marks", q, per, stream, _label(stream, "density_dual"))


def density_maximal_mc(points, t: float, eps, stream: RngStream, replicas: int, threads: int = 1,
                       scheme: StepScheme | None = None) -> DensityResult:
    """Estimate ``(4 eps)^-n P(the motions from x_i - eps and x_i + eps stay apart for all i)``.

    This pure separation event gives the density of the class ``[1/2]``.
    """
    q = DensityQuery(_HALF, t, tuple(np.atleast_1d(points)), eps, scheme=scheme or StepScheme())
    sch = _dual_scheme(q)
    per = []
    for k, e in enumerate(q.eps):
        x0 = DiscreteConfig(_dual_points(q.points, e))
        label = _label(stream, f"density_maximal:{k}")

        def one(s: RngStream, x0=x0):
            cl = cbm_run(x0, q.t, sch, s)[-1].block_of()
            return float(np.all(cl[0::2] != cl[1::2]))

        vals = np.array(run_replicas(one, replicas, label, stream.root_seed, threads)) * (4 * e) ** -q.n
        per.append(EstimateWithCI.from_samples(vals, root_seed=stream.root_seed, experiment=label))
    return _independent_result("dual_separation", q, per, stream, _label(stream, "density_maximal"))


_HALF = DensityProfile((), (0.5,))


def _free_motions(start: np.ndarray, t: float, n_steps: int, size: int, rng: np.random.Generator,
                  weights: bool) -> tuple[np.ndarray, np.ndarray]:
    """Independent motions from ``start`` with the bridge test on adjacent gaps.

    Returns end positions ``(size, m)`` and either survival weights (the
    product of per-step no-touch probabilities) or 0/1 survival indicators.
    """
    m = start.size
    dt = t / n_steps
    x = np.broadcast_to(start, (size, m)).copy()
    w = np.ones(size)
    for _ in range(n_steps):
        y = x + math.sqrt(dt) * rng.standard_normal((size, m))
        a = np.diff(x, axis=1)
        b = np.diff(y, axis=1)
        with np.errstate(over="ignore", invalid="ignore"):
            stay = np.where((a > 0) & (b > 0), -np.expm1(-np.clip(a * b, 0, None) / dt), 0.0)
        if weights:
            w *= np.prod(stay, axis=1)
        else:
            w *= np.all(rng.random(stay.shape) < stay, axis=1)
        x = y
    return x, w


def q_estimate(points, t: float, eps, stream: RngStream, replicas: int, n_steps: int | None = None,
               block: int = 20000) -> DensityResult:
    """Estimate ``(2 eps)^-n P(no two of the 2n motions from x_i -+ eps meet by t)``.

    Each replica contributes the conditional no-touch probability of its
    discretised path (bridge corrected on adjacent gaps).  For ``n = 1`` a
    single gap is involved and the estimate has no discretisation bias.
    """
    q = DensityQuery(_HALF, t, tuple(np.atleast_1d(points)), eps)
    steps = n_steps or (8 if q.n == 1 else 256)
    g = stream.generator
    per = []
    for e in q.eps:
        start = _dual_points(q.points, e)
        vals = []
        left = replicas
        while left > 0:
            size = min(block, left)
            _, w = _free_motions(start, t, steps, size, g, weights=True)
            vals.append(w)
            left -= size
        vals = np.concatenate(vals) * (2 * e) ** -q.n
        per.append(EstimateWithCI.from_samples(vals, root_seed=stream.root_seed, experiment=_label(stream, "q")))
    return _independent_result("q", q, per, stream, _label(stream, "q"), n_steps=steps)


def thinned_density_formula(u: DensityProfile, t: float, points, eps=None, stream: RngStream | None = None,
                            replicas: int = 100000, n_steps: int = 256, block: int = 20000) -> DensityResult:
    """Thinned density as ``q/2`` times the conditional mark expectation of non-colliding motions.

    For one point the non-colliding pair is sampled exactly and ``q`` is
    ``1/sqrt(pi t)``; the result needs no extrapolation.  For ``n >= 2``
    the 2n motions are simulated independently and rejected on collision,
    with at most ``10**7`` attempts per half-width; ``info["accepted"]``
    holds the effective sample sizes.
    """
    if stream is None:
        raise ValueError("a random stream is required")
    pts = tuple(float(p) for p in np.atleast_1d(points))
    if len(pts) == 1:
        x = pts[0]
        y = noncolliding_pairs(t, stream, replicas)
        h = match_indicator(u, x + y[:, 0], x + y[:, 1])
        vals = 0.5 * h / math.sqrt(math.pi * t)
        est = EstimateWithCI.from_samples(vals, root_seed=stream.root_seed, experiment=_label(stream, "thin_formula"))
        return DensityResult("formula", (0.0,), (est,), est, {"accepted": [replicas]})
    q = DensityQuery(u, t, pts, eps)
    g = stream.generator
    per = []
    accepted = []
    for e in q.eps:
        start = _dual_points(q.points, e)
        sums = []
        n_acc = 0
        tried = 0
        while n_acc < replicas and tried < REJECTION_CAP:
            size = min(block, REJECTION_CAP - tried)
            y, alive = _free_motions(start, t, n_steps, size, g, weights=False)
            uy = np.asarray(u(y), dtype=float)
            a, b = uy[:, 0::2], uy[:, 1::2]
            gval = np.prod(a * (1 - b), axis=1) + np.prod((1 - a) * b, axis=1)
            sums.append(np.where(alive > 0, gval, 0.0))
            n_acc += int(np.count_nonzero(alive))
            tried += size
        vals = np.concatenate(sums) * 0.5 * (2 * e) ** -q.n
        per.append(EstimateWithCI.from_samples(vals, root_seed=stream.root_seed, experiment=_label(stream, "thin_formula")))
        accepted.append(n_acc)
    return _independent_result("formula", q, per, stream, _label(stream, "thin_formula"), accepted=accepted)


def _segments(u: DensityProfile, x: float) -> list[tuple[float, float, float]]:
    """Pieces ``(a, b, value)`` of ``y -> u(x + y)``."""
    edges = [-math.inf, *[float(bp) - x for bp in u.breakpoints], math.inf]
    return [(a, b, float(v)) for a, b, v in zip(edges[:-1], edges[1:], u.values)]


def _G(a: float, b: float, c: float, t: float) -> float:
    # integral over [a, b] of (y - c) exp(-y^2 / 2t)
    ea = 0.0 if math.isinf(a) else math.exp(-a * a / (2 * t))
    eb = 0.0 if math.isinf(b) else math.exp(-b * b / (2 * t))
    return t * (ea - eb) - c * math.sqrt(2 * math.pi * t) * normal_interval(a / math.sqrt(t), b / math.sqrt(t))


def _inner(y1: float, pieces, t: float) -> float:
    """Integral over y2 of (1 - u(x + y2)) |y2 - y1| exp(-y2^2 / 2t)."""
    total = 0.0
    for a, b, v in pieces:
        w = 1.0 - v
        if w == 0.0:
            continue
        if b <= y1:
            total += w * -_G(a, b, y1, t)
        elif a >= y1:
            total += w * _G(a, b, y1, t)
        else:
            total += w * (_G(y1, b, y1, t) - _G(a, y1, y1, t))
    return total


def density1_quadrature(u: DensityProfile, t: float, x: float, tol: float = 1e-8) -> float:
    """One-point density of the class ``[u]`` at ``(t, x)``.

    The inner integral is done in closed form piece by piece; the outer one
    by adaptive quadrature over each interval where ``u`` is constant.

    Raises
    ------
    QuadratureNotConverged
        If the accumulated error estimate exceeds ``tol``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not isinstance(u.domain, Line):
        raise NotImplementedError("quadrature is implemented on the line")
    pieces = _segments(u, float(x))
    total = 0.0
    err = 0.0
    cut = 40.0 * math.sqrt(t)
    for a, b, v in pieces:
        if v == 0.0:
            continue
        lo, hi = max(a, -cut), min(b, cut)
        if lo >= hi:
            continue
        f = lambda y1: math.exp(-y1 * y1 / (2 * t)) * _inner(y1, pieces, t)
        val, e = integrate.quad(f, lo, hi, epsabs=tol / 10, epsrel=1e-12, limit=200)
        total += v * val
        err += abs(v * e)
    scale = 1.0 / (2 * math.pi * t * t)
    if err * scale > tol:
        raise QuadratureNotConverged(f"error estimate {err * scale:.3g} exceeds {tol:.3g}")
    return total * scale
