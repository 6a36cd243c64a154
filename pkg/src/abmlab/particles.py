"""Coalescing and annihilating Brownian motions on the line or a torus.

Both systems share the compiled kernel in :mod:`abmlab._kernel`; a
coalescing run additionally tracks, for every surviving particle, the
contiguous block of initial indices whose paths have merged into it.
Keeping the particles whose block has odd size gives an annihilating
system, which :func:`abm_via_parity` exploits as an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernel import advance
from .configurations import LINE, DiscreteConfig, Line, Torus
from .rng import RngStream

__all__ = [
    "StepScheme",
    "CoalescingState",
    "AnnihilatingState",
    "CollisionEvents",
    "cbm_run",
    "abm_run",
    "abm_via_parity",
    "parity_restrict",
    "thin",
    "thin_parts",
    "count_in",
    "parity_in",
]

DEFAULT_STEPS = 2048


@dataclass(frozen=True)
class StepScheme:
    """Time discretisation of a run.

    Parameters
    ----------
    dt : float, optional
        Requested step.  Defaults to ``horizon / 2048``.  The step actually
        used is shrunk so that it divides the horizon exactly.
    bridge_correction : bool
        Test each adjacent gap for a touch inside the step (default) rather
        than only for crossing at the end of the step.
    refine_start : bool
        Split the first grid steps into shorter sub-steps while the initial
        spacing is below ``2 sqrt(dt)``.  The gap tests treat neighbouring
        gaps as independent, which is only accurate when a particle rarely
        has both neighbours within one step's reach.
    """

    dt: float | None = None
    bridge_correction: bool = True
    refine_start: bool = True

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    def grid(self, horizon: float) -> tuple[int, float]:
        """Number of steps and effective step size for ``horizon``."""
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dt is None:
            n = DEFAULT_STEPS
        else:
            n = max(1, math.ceil(horizon / self.dt - 1e-9))
        return n, horizon / n


def _domain_circ(domain) -> float:
    return float(domain.circumference) if isinstance(domain, Torus) else 0.0


@dataclass(frozen=True, eq=False)
class AnnihilatingState:
    """Sorted positions of surviving annihilating particles at ``time``."""

    positions: np.ndarray
    time: float
    ids: np.ndarray | None = None
    domain: Line | Torus = LINE

    def __len__(self) -> int:
        return int(self.positions.size)

    @property
    def count(self) -> int:
        return len(self)

    def to_config(self) -> DiscreteConfig:
        return DiscreteConfig(self.positions, self.domain)

    def to_dict(self) -> dict:
        return {"time": float(self.time), "positions": [float(p) for p in self.positions]}


@dataclass(frozen=True, eq=False)
class CoalescingState:
    """Surviving coalescing particles with their blocks of initial indices.

    Particle ``k`` sits at ``positions[k]`` and carries the initial indices
    ``lo[k], lo[k] + 1, ..., lo[k] + width[k] - 1`` (0-based, taken modulo
    the initial count on a torus).
    """

    positions: np.ndarray
    lo: np.ndarray
    width: np.ndarray
    time: float
    n_initial: int
    ids: np.ndarray | None = None
    domain: Line | Torus = LINE

    def __len__(self) -> int:
        return int(self.positions.size)

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """Inclusive index ranges ``(first, last)``; ``last`` may wrap on a torus."""
        return [(int(a), int((a + w - 1) % self.n_initial)) for a, w in zip(self.lo, self.width)]

    def block_of(self) -> np.ndarray:
        """For every initial index, the position of the cluster it belongs to."""
        out = np.empty(self.n_initial, dtype=int)
        for k, (a, w) in enumerate(zip(self.lo, self.width)):
            out[(a + np.arange(w)) % self.n_initial] = k
        return out

    def to_dict(self) -> dict:
        return {
            "time": float(self.time),
            "positions": [float(p) for p in self.positions],
            "blocks": [[int(a), int(w)] for a, w in zip(self.lo, self.width)],
        }


@dataclass(frozen=True)
class CollisionEvents:
    """Collisions of a run: step-midpoint time, left and right labels, position."""

    time: np.ndarray
    left: np.ndarray
    right: np.ndarray
    position: np.ndarray

    def __len__(self) -> int:
        return int(self.time.size)


def _snapshot_steps(snapshot_times, horizon, n_steps, dt) -> list[tuple[float, int]]:
    if snapshot_times is None:
        return [(float(horizon), n_steps)]
    out = []
    for s in snapshot_times:
        if s < 0 or s > horizon * (1 + 1e-12):
            raise ValueError(f"snapshot time {s} outside [0, {horizon}]")
        out.append((float(s), int(round(s / dt))))
    if any(b[1] < a[1] for a, b in zip(out, out[1:])):
        raise ValueError("snapshot times must be non-decreasing")
    return out


WARMUP_RATIO = 8


def _typical_spacing(x: np.ndarray, circ: float) -> float:
    """Median over particles of the larger of its two gaps."""
    if x.size < 3:
        return math.inf
    gaps = np.diff(x)
    if circ > 0:
        gaps = np.append(gaps, x[0] + circ - x[-1])
        wide = np.maximum(gaps, np.roll(gaps, 1))
    else:
        wide = np.maximum(gaps[:-1], gaps[1:])
    return float(np.median(wide))


def _warmup(spacing: float, dt: float, n_steps: int) -> list[list[float]]:
    """Sub-step sizes for the leading grid steps of a dense start.

    Refinement starts when ``sqrt(dt)`` exceeds half the spacing.  At
    elapsed time ``s`` the sub-step is ``max((spacing/2)**2, s / WARMUP_RATIO)``,
    so it tracks the diffusive growth of the spacing.  Entry ``k`` splits
    grid step ``k``; the list ends once the plain grid step is short enough.
    """
    floor = 0.25 * spacing * spacing
    if not floor < dt:
        return []
    out = []
    s = 0.0
    for k in range(n_steps):
        if dt <= s / WARMUP_RATIO:
            break
        end = (k + 1) * dt
        subs = []
        while end - s > 1e-12 * dt:
            h = min(max(floor, s / WARMUP_RATIO), end - s)
            subs.append(h)
            s += h
        s = end
        out.append(subs)
    return out


def _as_config(x0) -> DiscreteConfig:
    if isinstance(x0, DiscreteConfig):
        return x0
    return DiscreteConfig(np.asarray(x0, dtype=float))


def _run(x0, horizon, scheme, stream, snapshot_times, coalesce):
    x0 = _as_config(x0)
    scheme = scheme or StepScheme()
    n_steps, dt = scheme.grid(horizon)
    snaps = _snapshot_steps(snapshot_times, horizon, n_steps, dt)
    circ = _domain_circ(x0.domain)
    n0 = len(x0)
    x = np.asarray(x0.positions, dtype=np.float64).copy()
    ids = np.arange(n0, dtype=np.int64)
    lo = ids.copy()
    width = np.ones(n0, dtype=np.int64)
    rng = stream.generator
    warm = _warmup(_typical_spacing(x, circ), dt, n_steps) if scheme.refine_start else []
    states = []
    ev_parts = []
    step = 0
    for s_time, s_step in snaps:
        while step < min(s_step, len(warm)) and x.size:
            t = step * dt
            for h in warm[step]:
                x, ids, lo, width, et, el, er, ex = advance(
                    x, ids, lo, width, circ, coalesce, 1, h, scheme.bridge_correction, t, rng
                )
                ev_parts.append((et, el, er, ex))
                t += h
            step += 1
        step = max(step, min(s_step, len(warm)))
        todo = s_step - step
        if todo > 0 and x.size:
            x, ids, lo, width, et, el, er, ex = advance(
                x, ids, lo, width, circ, coalesce, todo, dt, scheme.bridge_correction, step * dt, rng
            )
            ev_parts.append((et, el, er, ex))
        step = s_step
        x.setflags(write=False)
        if coalesce:
            states.append(CoalescingState(x, lo.copy(), width.copy(), s_time, n0, ids.copy(), x0.domain))
        else:
            states.append(AnnihilatingState(x, s_time, ids.copy(), x0.domain))
        x = x.copy()
    if ev_parts:
        events = CollisionEvents(*(np.concatenate([p[k] for p in ev_parts]) for k in range(4)))
    else:
        events = CollisionEvents(np.empty(0), np.empty(0, int), np.empty(0, int), np.empty(0))
    return states, events


def cbm_run(x0, horizon: float, scheme: StepScheme | None = None, stream: RngStream | None = None,
            snapshot_times: Sequence[float] | None = None, *, return_events: bool = False):
    """Coalescing Brownian motions from ``x0`` up to ``horizon``.

    Returns one :class:`CoalescingState` per snapshot time (default: the
    horizon only), plus the :class:`CollisionEvents` when requested.  When
    two particles meet, the merged particle follows the path of the left one.
    """
    if stream is None:
        raise ValueError("a random stream is required")
    states, events = _run(x0, horizon, scheme, stream, snapshot_times, coalesce=True)
    return (states, events) if return_events else states


def abm_run(x0, horizon: float, scheme: StepScheme | None = None, stream: RngStream | None = None,
            snapshot_times: Sequence[float] | None = None, *, return_events: bool = False):
    """Annihilating Brownian motions from ``x0``: a meeting pair is removed."""
    if stream is None:
        raise ValueError("a random stream is required")
    states, events = _run(x0, horizon, scheme, stream, snapshot_times, coalesce=False)
    return (states, events) if return_events else states


def parity_restrict(state: CoalescingState) -> AnnihilatingState:
    """Keep the coalescing particles whose block has an odd number of initial indices."""
    keep = (np.asarray(state.width) % 2) == 1
    ids = None if state.ids is None else np.asarray(state.ids)[keep]
    return AnnihilatingState(np.asarray(state.positions)[keep], state.time, ids, state.domain)


def abm_via_parity(x0, horizon: float, scheme: StepScheme | None = None, stream: RngStream | None = None,
                   snapshot_times: Sequence[float] | None = None) -> list[AnnihilatingState]:
    """Annihilating system obtained as the odd-block part of a coalescing run."""
    return [parity_restrict(s) for s in cbm_run(x0, horizon, scheme, stream, snapshot_times)]


def thin_parts(x) -> tuple[np.ndarray, np.ndarray]:
    """Split sorted points into the two alternating subsets; the first holds the maximum."""
    pos = np.asarray(x.positions if isinstance(x, DiscreteConfig) else x)
    n = pos.size
    from_top = (n - 1 - np.arange(n)) % 2 == 0
    return pos[from_top], pos[~from_top]


def thin(x, stream: RngStream):
    """Return either alternating subset of ``x`` with probability one half each."""
    first, second = thin_parts(x)
    pick = first if stream.generator.random() < 0.5 else second
    if isinstance(x, DiscreteConfig):
        return DiscreteConfig(pick, x.domain)
    return pick


def _positions_of(state) -> tuple[np.ndarray, float]:
    if isinstance(state, (AnnihilatingState, CoalescingState, DiscreteConfig)):
        return np.asarray(state.positions, dtype=float), _domain_circ(state.domain)
    return np.asarray(state, dtype=float), 0.0


def count_in(state, interval, closed: tuple[bool, bool] = (True, True)) -> int:
    """Number of points in ``interval = (a, b)``.

    ``closed`` selects whether each endpoint is included.  On a torus an
    interval with ``a > b`` (after reduction modulo ``L``) is the arc
    running from ``a`` through ``0`` to ``b``.
    """
    pos, circ = _positions_of(state)
    a, b = interval
    left_side = "left" if closed[0] else "right"
    right_side = "right" if closed[1] else "left"
    if circ > 0:
        a, b = a % circ, b % circ
        if a > b:
            return int(pos.size - np.searchsorted(pos, a, side=left_side) + np.searchsorted(pos, b, side=right_side))
    return int(max(0, np.searchsorted(pos, b, side=right_side) - np.searchsorted(pos, a, side=left_side)))


def parity_in(state, interval, closed: tuple[bool, bool] = (True, True)) -> str:
    return "odd" if count_in(state, interval, closed) % 2 else "even"
