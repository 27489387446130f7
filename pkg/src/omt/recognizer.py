"""Streaming recognizers: online manifold tracking and the nearest-neighbor
baseline."""

from __future__ import annotations

import io
import json

import numpy as np

from ._io import atomic_write_bytes
from .core import OmtConfig, as_vector
from .inference import Prediction, infer_identity
from .quantizer import CoverState, quantize_step

SNAPSHOT_VERSION = 1


class OmtRecognizer:
    """Quantize each arriving vector into the cover, then classify it
    against the updated cover.

    Not thread safe: one writer per recognizer. Independent streams should
    each get their own instance.
    """

    def __init__(self, cfg: OmtConfig, cover: CoverState | None = None, step_count: int = 0):
        self.cfg = cfg
        self.cover = cover if cover is not None else CoverState.empty(cfg.dim, cfg.r0)
        self.step_count = step_count

    def process_step(self, x_t) -> Prediction:
        x = self.cfg.project(x_t)
        self.cover = quantize_step(self.cover, x, self.cfg, t=self.step_count)
        self.step_count += 1
        return infer_identity(self.cover, x, self.cfg)

    def process(self, stream):
        """Yield one prediction per vector of ``stream``."""
        for x in stream:
            yield self.process_step(x)

    def save(self, path) -> None:
        """Write a versioned ``.npz`` snapshot (config, cover, step count).

        The file is written to a temporary name and renamed into place.
        """
        cfg = self.cfg
        meta = {
            "version": SNAPSHOT_VERSION,
            "radius": cfg.radius, "k": cfg.k, "r0": cfg.r0, "sigma": cfg.sigma,
            "gamma": cfg.gamma, "epsilon": cfg.epsilon,
            "step_count": self.step_count,
            "doubling_count": self.cover.doubling_count,
        }
        arrays = {
            "meta": np.array(json.dumps(meta, sort_keys=True)),
            "anchor": cfg.labeled_anchor,
            "indices": np.asarray(self.cover.indices, dtype=np.int64),
            "vectors": self.cover.vectors,
        }
        if cfg.projection is not None:
            arrays["projection"] = cfg.projection
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        atomic_write_bytes(path, buf.getvalue())

    @classmethod
    def load(cls, path) -> "OmtRecognizer":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("version") != SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {meta.get('version')!r}")
            cfg = OmtConfig(
                labeled_anchor=z["anchor"], radius=meta["radius"], k=meta["k"],
                r0=meta["r0"], sigma=meta["sigma"], gamma=meta["gamma"],
                epsilon=meta["epsilon"],
                projection=z["projection"] if "projection" in z.files else None,
            )
            cover = CoverState.from_vectors(z["indices"], z["vectors"], cfg.r0,
                                            meta["doubling_count"], dim=cfg.dim)
        return cls(cfg, cover, meta["step_count"])


class NnRecognizer:
    """Fires when a vector lies within ``radius`` of any labeled anchor."""

    def __init__(self, anchors, radius: float):
        A = np.array(anchors, dtype=np.float64)
        if A.ndim == 1:
            A = A[None, :]
        if A.ndim != 2 or A.shape[0] == 0:
            raise ValueError("need at least one anchor")
        for a in A:
            as_vector(a)
        if not radius >= 0:
            raise ValueError(f"radius must be nonnegative, got {radius}")
        A.setflags(write=False)
        self.anchors = A
        self.radius = float(radius)

    def nn_score(self, x) -> float:
        x = as_vector(x, self.anchors.shape[1])
        return float(np.min(np.linalg.norm(self.anchors - x, axis=1)))

    def nn_classify(self, x) -> int:
        return int(self.nn_score(x) <= self.radius)

    def scores(self, X) -> np.ndarray:
        """Vectorized ``nn_score`` over the rows of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        out = np.full(X.shape[0], np.inf)
        for a in self.anchors:
            np.minimum(out, np.linalg.norm(X - a, axis=1), out=out)
        return out
