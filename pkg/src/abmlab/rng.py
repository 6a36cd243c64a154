"""Reproducible, splittable random streams.

Every stream is a Philox counter-based generator keyed by the pair
``(root_seed, stream_id)``; the sample sequence depends on nothing else,
so replicas can be fanned out over any number of threads.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

__all__ = ["RngStream", "stream_id_for", "resolve_seed", "DEFAULT_SEED", "SEED_ENV"]

DEFAULT_SEED = 0x5EED
SEED_ENV = "ABMLAB_SEED"
_MASK64 = (1 << 64) - 1


def stream_id_for(experiment: str, replica: int) -> int:
    """64-bit stream id of replica ``replica`` of experiment ``experiment``."""
    digest = hashlib.blake2b(f"{experiment}\x1f{int(replica)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def resolve_seed(seed: int | None = None) -> int:
    """Explicit seed, else ``$ABMLAB_SEED`` (decimal), else ``0x5EED``."""
    if seed is not None:
        return int(seed) & _MASK64
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return int(env.strip(), 10) & _MASK64
    return DEFAULT_SEED


class RngStream:
    """A deterministic random stream identified by ``(root_seed, stream_id)``.

    Parameters
    ----------
    root_seed : int
        64-bit experiment seed.
    stream_id : int
        64-bit stream identifier; use :func:`stream_id_for` or :meth:`spawn`.

    Notes
    -----
    The underlying ``numpy.random.Generator`` is exposed as
    :attr:`generator`.  A stream is owned by a single task; to fan out,
    derive fresh streams with :meth:`spawn` instead of sharing one.
    """

    __slots__ = ("root_seed", "stream_id", "_bitgen", "generator")

    def __init__(self, root_seed: int, stream_id: int = 0):
        self.root_seed = int(root_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self._bitgen = np.random.Philox(key=(self.stream_id << 64) | self.root_seed)
        self.generator = np.random.Generator(self._bitgen)

    @classmethod
    def for_replica(cls, root_seed: int, experiment: str, replica: int) -> "RngStream":
        return cls(root_seed, stream_id_for(experiment, replica))

    @property
    def counter(self) -> int:
        """Number of 256-bit Philox blocks consumed so far."""
        words = self._bitgen.state["state"]["counter"]
        return int(sum(int(w) << (64 * k) for k, w in enumerate(words)))

    def spawn(self, label: str | int) -> "RngStream":
        """Child stream with an id derived from this stream's id and ``label``."""
        digest = hashlib.blake2b(f"{self.stream_id}\x1e{label}".encode(), digest_size=8).digest()
        return RngStream(self.root_seed, int.from_bytes(digest, "little"))

    def provenance(self) -> dict:
        return {"root_seed": self.root_seed, "stream_id": self.stream_id}

    def __repr__(self) -> str:
        return f"RngStream(root_seed={self.root_seed:#x}, stream_id={self.stream_id:#x}, counter={self.counter})"
