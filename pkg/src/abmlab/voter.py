"""Continuous-space voter model.

Two constructions are provided.  For a two-valued initial profile the
interfaces are run as annihilating Brownian motions and the profile is
recovered by alternating colours across them.  For any profile, the
values at finitely many points at a fixed time are obtained by running
coalescing motions from the query points and giving every surviving
cluster an independent Bernoulli mark with parameter ``u0`` at its
endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .configurations import DensityProfile, DiscreteConfig, NotTwoValued, class_from_config, interface_of
from .particles import AnnihilatingState, StepScheme, abm_run, cbm_run
from .rng import RngStream

__all__ = ["VoterState", "MarkedEndpoints", "voter_run_interface", "voter_marginal_marks", "match_indicator"]


@dataclass(frozen=True, eq=False)
class VoterState:
    """Two-valued voter configuration given by its interfaces.

    ``left_color`` is the colour on the unbounded component left of all
    interfaces (on a torus: the colour of the arc containing position 0).
    """

    interfaces: AnnihilatingState
    left_color: int
    time: float

    def profile(self) -> DensityProfile:
        return class_from_config(self.interfaces.to_config(), self.left_color)

    def __call__(self, x):
        """Colour at ``x`` (vectorised)."""
        pos = np.asarray(self.interfaces.positions)
        xs = np.asarray(x, dtype=float)
        dom = self.interfaces.domain
        if hasattr(dom, "circumference"):
            xs = np.mod(xs, dom.circumference)
        crossings = np.searchsorted(pos, xs, side="right")
        out = (self.left_color + crossings) % 2
        return int(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class MarkedEndpoints:
    """Dual cluster endpoints with one Bernoulli mark per cluster.

    ``cluster_of[i]`` is the cluster of query point ``i``; clusters are
    numbered left to right by endpoint position.
    """

    positions: np.ndarray
    cluster_of: np.ndarray
    marks: np.ndarray

    @property
    def bits(self) -> np.ndarray:
        return self.marks[self.cluster_of]


def _left_colors_by_id(left0: int, ids: np.ndarray) -> np.ndarray:
    # the colour just left of interface k never changes while k survives
    return (left0 + np.asarray(ids)) % 2


def voter_run_interface(u0: DensityProfile, horizon: float, scheme: StepScheme | None = None,
                        stream: RngStream | None = None, snapshot_times: Sequence[float] | None = None
                        ) -> list[VoterState]:
    """Run a two-valued voter profile through its annihilating interfaces.

    Raises
    ------
    NotTwoValued
        If ``u0`` takes a value strictly between 0 and 1.
    """
    if not u0.is_two_valued:
        raise NotTwoValued(f"profile has values strictly between 0 and 1: {u0.values}")
    x0 = interface_of(u0)
    # colour just left of the interface with label 0: the left tail on the
    # line, the wrapping arc on a torus
    left0 = int(u0.values[-1]) if x0.is_torus else int(u0.values[0])
    if len(x0) == 0:
        times = [float(horizon)] if snapshot_times is None else [float(s) for s in snapshot_times]
        return [VoterState(AnnihilatingState(np.empty(0), s, np.empty(0, int), x0.domain), left0, s) for s in times]
    out = []
    for s in abm_run(x0, horizon, scheme, stream, snapshot_times):
        color = int(_left_colors_by_id(left0, s.ids[:1])[0]) if len(s) else left0
        out.append(VoterState(s, color, s.time))
    return out


def voter_marginal_marks(u0: DensityProfile, t: float, query_points, stream: RngStream,
                         scheme: StepScheme | None = None) -> tuple[MarkedEndpoints, np.ndarray]:
    """Values ``u_t(x_1), ..., u_t(x_m)`` from a coalescing dual with Bernoulli marks.

    Coalescing motions run from the query points for time ``t``; every
    surviving cluster with endpoint ``y`` gets an independent mark equal to
    1 with probability ``u0(y)``, one uniform draw per cluster from left to
    right.
    """
    xs = np.asarray(query_points, dtype=float)
    if xs.size > 1 and np.any(np.diff(xs) <= 0):
        raise ValueError("query points must be strictly increasing")
    if xs.size == 0:
        return MarkedEndpoints(np.empty(0), np.empty(0, int), np.empty(0, int)), np.empty(0, int)
    state = cbm_run(DiscreteConfig(xs, u0.domain), t, scheme, stream)[-1]
    probs = np.asarray(u0(state.positions), dtype=float)
    u = stream.generator.random(len(state))
    marks = (u < probs).astype(int)
    cluster_of = state.block_of()
    me = MarkedEndpoints(np.asarray(state.positions), cluster_of, marks)
    return me, me.bits


def match_indicator(u: DensityProfile, y1, y2):
    """``u(y1)(1 - u(y2)) + (1 - u(y1)) u(y2)``: probability that independent marks differ."""
    a = np.asarray(u(y1), dtype=float)
    b = np.asarray(u(y2), dtype=float)
    out = a * (1 - b) + (1 - a) * b
    return float(out) if out.ndim == 0 else out
