"""Feature vectors, the Euclidean metric, the Gaussian kernel and the
configuration object shared by every other module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_SIGMA = 0.03
DEFAULT_GAMMA = math.exp(-4.5)  # sink weight = kernel value at 3 sigma
DEFAULT_RADIUS = 0.3
DEFAULT_K = 300
DEFAULT_EPSILON = 0.5
DEFAULT_R0 = 0.05


class OmtError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(OmtError, ValueError):
    """Vectors of different dimension were combined."""


class NumericalError(OmtError, ArithmeticError):
    """A linear solve was singular or produced non-finite values."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Return `x` as a 1-D float64 array, checking finiteness and `dim`."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("feature vector contains NaN or Inf")
    return v


def distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def kernel(d, sigma: float):
    """Gaussian similarity exp(-d^2 / (2 sigma^2)) of a distance or array of distances."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d = np.asarray(d, dtype=np.float64)
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def similarity(a, b, sigma: float) -> float:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return float(kernel(distance(a, b), sigma))


def normalize_dataset(vectors) -> tuple[np.ndarray, float]:
    """Scale a set of vectors so that the largest Euclidean norm is 1.

    Returns the scaled ``(n, dim)`` array and the multiplicative factor,
    which should be applied unchanged to data arriving later. Sets whose
    largest norm is already 1 to within a few ulps are returned unchanged.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty list of vectors")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature vectors contain NaN or Inf")
    peak = float(np.max(np.abs(X)))
    if peak == 0.0:
        raise ValueError("all vectors are zero; scale is undefined")
    # pre-scale by the largest entry so tiny or huge inputs do not under/overflow
    rel = float(np.max(np.linalg.norm(X / peak, axis=1)))
    if abs(peak * rel - 1.0) <= 4 * np.finfo(np.float64).eps:
        # already unit scale up to rounding; keeps re-normalization a no-op
        return X.copy(), 1.0
    scaled = (X / peak) / rel
    factor = 1.0 / (peak * rel)
    # exact unit max norm despite rounding in the multiply
    norms = np.linalg.norm(scaled, axis=1)
    top = int(np.argmax(norms))
    if norms[top] != 1.0:
        scaled[top] = scaled[top] / norms[top]
    return scaled, factor


@dataclass(frozen=True, eq=False)
class OmtConfig:
    """All tunables of the recognizer.

    Attributes:
        labeled_anchor: the single labeled feature vector.
        radius: generalization radius R; points farther than this from the
            anchor are neither quantized nor classified positive.
        k: maximum number of representatives.
        r0: initial cover radius.
        sigma: heat parameter of the Gaussian kernel.
        gamma: edge weight from each representative to the sink.
        epsilon: recognition threshold on the absorption score.
    """

    labeled_anchor: np.ndarray
    radius: float = DEFAULT_RADIUS
    k: int = DEFAULT_K
    r0: float = DEFAULT_R0
    sigma: float = DEFAULT_SIGMA
    gamma: float = DEFAULT_GAMMA
    epsilon: float = DEFAULT_EPSILON
    projection: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "labeled_anchor", as_vector(self.labeled_anchor))
        self.labeled_anchor.setflags(write=False)
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.projection is not None:
            P = np.asarray(self.projection, dtype=np.float64)
            if P.ndim != 2:
                raise DimensionError("projection must be a 2-D matrix")
            P.setflags(write=False)
            object.__setattr__(self, "projection", P)

    @property
    def dim(self) -> int:
        return self.labeled_anchor.size

    def with_(self, **changes) -> "OmtConfig":
        return replace(self, **changes)

    def project(self, x) -> np.ndarray:
        """Map a raw input vector into the space the recognizer works in.

        Without a projection matrix this is only validation. With one, the
        matrix is applied as ``P @ x`` and distances are Euclidean in the
        projected space. The anchor is assumed to be already projected.
        """
        if self.projection is None:
            return as_vector(x, self.dim)
        x = as_vector(x, self.projection.shape[1])
        return as_vector(self.projection @ x, self.dim)
