"""Absorbing random walk inference on the cover.

The graph has one vertex per representative plus the labeled anchor. An
implicit sink is attached to every representative with weight ``gamma``;
its only trace in the closed form is the ``gamma * I`` term added to the
unlabeled block of the Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .core import NumericalError, OmtConfig, as_vector, kernel
from .quantizer import CoverState, EmptyCoverError, nearest_representative


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    weights: np.ndarray
    degrees: np.ndarray
    laplacian: np.ndarray
    labeled_index: int

    @property
    def unlabeled(self) -> np.ndarray:
        n = self.weights.shape[0]
        return np.delete(np.arange(n), self.labeled_index)

    @property
    def w_ul(self) -> np.ndarray:
        return np.delete(self.weights[:, self.labeled_index], self.labeled_index)


@dataclass(frozen=True)
class Prediction:
    gated: bool
    identity: int
    nearest_index: int | None = None
    score: float | None = None


def graph_from_weights(W: np.ndarray, labeled_index: int) -> SimilarityGraph:
    W = np.array(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    np.fill_diagonal(W, 0.0)
    deg = W.sum(axis=1)
    L = np.diag(deg) - W
    return SimilarityGraph(W, deg, L, int(labeled_index))


def build_graph(state: CoverState, x_l, sigma: float) -> SimilarityGraph:
    """Gaussian similarity graph over the representatives plus ``x_l``.

    The anchor is the last vertex. Diagonal weights are zero; self-loops
    cancel in the Laplacian and do not change absorption probabilities.
    """
    m = len(state)
    if m == 0:
        raise EmptyCoverError("cannot build a graph over an empty cover")
    x_l = as_vector(x_l, state.dim)
    D = np.empty((m + 1, m + 1))
    D[:m, :m] = state.pairwise
    d_l = np.linalg.norm(state.vectors - x_l, axis=1)
    D[m, :m] = d_l
    D[:m, m] = d_l
    D[m, m] = 0.0
    return graph_from_weights(kernel(D, sigma), m)


def harmonic_with_sink(graph: SimilarityGraph, gamma: float) -> np.ndarray:
    """Probability that a walk from each unlabeled vertex hits the anchor
    before the sink: solves ``(L_uu + gamma I) f = W_ul``."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    u = graph.unlabeled
    L_uu = graph.laplacian[np.ix_(u, u)]
    b = graph.w_ul
    if gamma == 0:
        # without the sink every component must reach the anchor
        n_comp, comp = connected_components(graph.weights > 0, directed=False)
        if n_comp > 1 and np.any(comp != comp[graph.labeled_index]):
            raise NumericalError("graph is disconnected from the labeled vertex and gamma is 0")
    A = L_uu + gamma * np.eye(len(u))
    try:
        f = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc
    if not np.all(np.isfinite(f)):
        raise NumericalError("harmonic solution is not finite")
    return np.clip(f, 0.0, 1.0)


def single_node_score(d: float, cfg: OmtConfig) -> float:
    """Closed form for a graph with one unlabeled vertex at distance ``d``."""
    w = float(kernel(d, cfg.sigma))
    if w + cfg.gamma == 0.0:
        raise NumericalError("zero total weight on a single-node graph")
    return w / (w + cfg.gamma)


def infer_identity(state: CoverState, x_t, cfg: OmtConfig) -> Prediction:
    """Gate on the generalization radius, then threshold the absorption
    score of the representative nearest to ``x_t``.

    A gated query against an empty cover is scored as if ``x_t`` were the
    only unlabeled vertex.
    """
    x = as_vector(x_t, cfg.dim)
    d_l = float(np.linalg.norm(x - cfg.labeled_anchor))
    if d_l > cfg.radius:
        return Prediction(gated=False, identity=0)
    if len(state) == 0:
        score = single_node_score(d_l, cfg)
        return Prediction(True, int(score > cfg.epsilon), None, score)
    f = harmonic_with_sink(build_graph(state, cfg.labeled_anchor, cfg.sigma), cfg.gamma)
    j, _ = nearest_representative(state, x)
    score = float(f[j])
    return Prediction(True, int(score > cfg.epsilon), j, score)
