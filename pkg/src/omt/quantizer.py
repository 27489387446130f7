"""Online k-center clustering with radius doubling.

The cover keeps at most ``k`` stream vectors (representatives) that are
pairwise farther apart than the cover radius ``r``. Whenever a new
representative would push the count to ``k + 1`` the radius is doubled and
the representatives are thinned greedily. Every gated point seen so far
stays within ``2 r`` of some representative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import DimensionError, OmtConfig, OmtError, as_vector


class EmptyCoverError(OmtError, LookupError):
    """An operation needed at least one representative."""


class Representative(NamedTuple):
    stream_index: int
    vector: np.ndarray


def _dists(V: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(V - x, axis=1)


def _pairwise(V: np.ndarray) -> np.ndarray:
    # row-wise with the same reduction as _absorb, so reloaded caches match bit for bit
    P = np.empty((V.shape[0], V.shape[0]))
    for i in range(V.shape[0]):
        P[i] = _dists(V, V[i])
    return P


@dataclass(frozen=True, eq=False)
class CoverState:
    """Immutable snapshot of the cover.

    ``vectors`` is a ``(m, dim)`` array in insertion order, ``indices`` the
    stream times at which the rows were inserted and ``pairwise`` the cached
    ``(m, m)`` matrix of distances between them.
    """

    indices: tuple[int, ...]
    vectors: np.ndarray
    pairwise: np.ndarray
    r: float
    r0: float
    doubling_count: int = 0

    @classmethod
    def empty(cls, dim: int, r0: float) -> "CoverState":
        if not r0 > 0:
            raise ValueError(f"r0 must be positive, got {r0}")
        return cls((), np.empty((0, dim)), np.empty((0, 0)), float(r0), float(r0), 0)

    @classmethod
    def from_vectors(cls, indices, vectors, r0: float, doubling_count: int = 0,
                     dim: int | None = None) -> "CoverState":
        """Rebuild a state from stored rows (used by snapshots and tests)."""
        V = np.array(vectors, dtype=np.float64)
        if V.size == 0:
            if dim is None:
                raise ValueError("dim is required for an empty cover")
            V = np.empty((0, dim))
        V = np.atleast_2d(V)
        V.setflags(write=False)
        P = _pairwise(V)
        P.setflags(write=False)
        return cls(tuple(int(i) for i in indices), V, P,
                   float(r0) * 2.0 ** doubling_count, float(r0), int(doubling_count))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def representatives(self) -> list[Representative]:
        return [Representative(i, v) for i, v in zip(self.indices, self.vectors)]

    def __len__(self) -> int:
        return len(self.indices)

    def dump_csv(self, path) -> None:
        """Write ``stream_index,f0,f1,...`` rows, one per representative."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stream_index"] + [f"f{i}" for i in range(self.dim)])
            for i, v in zip(self.indices, self.vectors):
                w.writerow([i] + [repr(float(x)) for x in v])


def greedy_repartition(reps, r: float) -> list:
    """Thin an ordered list of representatives to an r-separated r-cover.

    Scans in the given order and keeps a representative when it is farther
    than ``r`` from everything kept so far, so the first one always stays.
    """
    kept: list = []
    kept_vecs: list[np.ndarray] = []
    for rep in reps:
        v = np.asarray(rep.vector, dtype=np.float64)
        if not kept_vecs or np.min(np.linalg.norm(np.asarray(kept_vecs) - v, axis=1)) > r:
            kept.append(rep)
            kept_vecs.append(v)
    return kept


def _repartition_rows(pairwise: np.ndarray, r: float) -> list[int]:
    # Same scan as greedy_repartition, on cached distances.
    keep: list[int] = []
    for i in range(pairwise.shape[0]):
        if not keep or pairwise[i, keep].min() > r:
            keep.append(i)
    return keep


def quantize_step(state: CoverState, x_t, cfg: OmtConfig, t: int | None = None) -> CoverState:
    """Feed one stream vector to the cover and return the new state.

    ``t`` is the stream index recorded for a new representative; it
    defaults to one past the largest index already stored.
    """
    x = as_vector(x_t)
    if x.size != cfg.dim:
        raise DimensionError(f"expected dimension {cfg.dim}, got {x.size}")
    if x.size != state.dim:
        raise DimensionError(f"cover has dimension {state.dim}, got {x.size}")
    if np.linalg.norm(x - cfg.labeled_anchor) > cfg.radius:
        return state
    return _absorb(state, x, cfg.k, t)


def _absorb(state: CoverState, x: np.ndarray, k: int, t: int | None) -> CoverState:
    m = len(state)
    d = _dists(state.vectors, x) if m else np.empty(0)
    if m and d.min() <= state.r:
        return state
    if t is None:
        t = state.indices[-1] + 1 if m else 0

    indices = state.indices + (int(t),)
    V = np.vstack([state.vectors, x[None, :]])
    P = np.empty((m + 1, m + 1))
    P[:m, :m] = state.pairwise
    P[m, :m] = d
    P[:m, m] = d
    P[m, m] = 0.0

    r = state.r
    doublings = state.doubling_count
    while len(indices) == k + 1:
        r *= 2.0
        doublings += 1
        keep = _repartition_rows(P, r)
        indices = tuple(indices[i] for i in keep)
        V = V[keep]
        P = P[np.ix_(keep, keep)]

    V.setflags(write=False)
    P.setflags(write=False)
    return CoverState(indices, V, P, r, state.r0, doublings)


def nearest_representative(state: CoverState, x) -> tuple[int, float]:
    """Index (insertion order) and distance of the closest representative.

    Ties go to the earliest inserted representative.
    """
    if len(state) == 0:
        raise EmptyCoverError("cover has no representatives")
    x = as_vector(x, state.dim)
    d = _dists(state.vectors, x)
    j = int(np.argmin(d))
    return j, float(d[j])
