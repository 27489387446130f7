"""Rates, ROC sweeps, cover-error diagnostics and step timing."""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write_text
from .core import OmtConfig
from .quantizer import CoverState, EmptyCoverError, quantize_step
from .recognizer import NnRecognizer, OmtRecognizer
from .streams import Stream, SynthSpec, synth_stream


def confusion(predictions, labels) -> tuple[float, float]:
    """Return ``(tpr, fpr)`` for binary predictions against binary labels."""
    p = np.asarray(predictions).astype(bool)
    y = np.asarray(labels).astype(bool)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative label")
    return float(np.sum(p & y)) / n_pos, float(np.sum(p & ~y)) / n_neg


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


@dataclass
class RocCurve:
    """Operating points sorted by ``(fpr, tpr)``.

    The AUC is the trapezoid area under the points with (0, 0) and (1, 1)
    appended; a curve that stops short of (1, 1), such as a gated
    recognizer, is closed by a straight segment.
    """

    points: list[RocPoint]
    auc: float = field(init=False)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: (p.fpr, p.tpr, -p.threshold))
        self.auc = trapezoid_auc([p.fpr for p in self.points], [p.tpr for p in self.points])

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p.fpr for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p.tpr for p in self.points])

    def tpr_at_fpr(self, target: float) -> float:
        return tpr_at_fpr(self.fpr, self.tpr, target)

    def max_tpr(self) -> float:
        return float(self.tpr.max()) if self.points else 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("threshold,fpr,tpr\n")
        for p in self.points:
            out.write(f"{p.threshold!r},{p.fpr!r},{p.tpr!r}\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())


def _envelope(fpr, tpr) -> tuple[np.ndarray, np.ndarray]:
    f = np.concatenate([[0.0], np.asarray(fpr, dtype=float), [1.0]])
    t = np.concatenate([[0.0], np.asarray(tpr, dtype=float), [1.0]])
    order = np.lexsort((t, f))
    f, t = f[order], t[order]
    # monotone path: running max of tpr along increasing fpr
    t = np.maximum.accumulate(t)
    return f, t


def trapezoid_auc(fpr, tpr) -> float:
    f, t = _envelope(fpr, tpr)
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) / 2.0))


def tpr_at_fpr(fpr, tpr, target: float) -> float:
    """TPR at ``target`` FPR, interpolating linearly between ROC steps."""
    f, t = _envelope(fpr, tpr)
    # at a vertical step take the top of the step
    uf, first = np.unique(f[::-1], return_index=True)
    ut = t[::-1][first]
    return float(np.interp(target, uf, ut))


def smallest_nonzero_fpr_point(curve: RocCurve) -> RocPoint | None:
    nz = [p for p in curve.points if p.fpr > 0]
    if not nz:
        return None
    m = min(p.fpr for p in nz)
    return max((p for p in nz if p.fpr == m), key=lambda p: p.tpr)


# -- scores -----------------------------------------------------------------

def omt_scores(stream: Stream, cfg: OmtConfig, recognizer: OmtRecognizer | None = None) -> np.ndarray:
    """Replay ``stream`` through a fresh recognizer and return per-step
    absorption scores, ``-inf`` for ungated steps.

    Scores do not depend on the threshold, so a single replay serves a
    whole threshold sweep. Pass ``recognizer`` to inspect its final state.
    """
    rec = recognizer if recognizer is not None else OmtRecognizer(cfg)
    out = np.empty(len(stream))
    for i, x in enumerate(stream.vectors):
        p = rec.process_step(x)
        out[i] = p.score if p.gated else -math.inf
    return out


def nn_scores(stream: Stream, anchors) -> np.ndarray:
    return NnRecognizer(anchors, 0.0).scores(stream.vectors)


def _rates_above(scores, labels, thresholds, inclusive_below: bool):
    """Per-threshold (tpr, fpr).

    ``inclusive_below=False``: fire when score > threshold (OMT).
    ``inclusive_below=True``: fire when score <= threshold (NN distance).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    thr = np.asarray(thresholds, dtype=float)
    pos, neg = np.sort(s[y]), np.sort(s[~y])
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative label")
    if inclusive_below:
        tp = np.searchsorted(pos, thr, side="right")
        fp = np.searchsorted(neg, thr, side="right")
    else:
        tp = pos.size - np.searchsorted(pos, thr, side="right")
        fp = neg.size - np.searchsorted(neg, thr, side="right")
    return tp / pos.size, fp / neg.size


def _grid(thresholds, scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    obs = s[np.isfinite(s)]
    return np.unique(np.concatenate([np.asarray(list(thresholds), dtype=float), obs]))


def _curve(thr, tpr, fpr) -> RocCurve:
    return RocCurve([RocPoint(float(a), float(b), float(c)) for a, b, c in zip(thr, tpr, fpr)])


def roc_from_omt_scores(scores, labels, thresholds) -> RocCurve:
    thr = _grid(thresholds, scores)
    tpr, fpr = _rates_above(scores, labels, thr, inclusive_below=False)
    return _curve(thr, tpr, fpr)


def roc_from_nn_scores(scores, labels, radii) -> RocCurve:
    thr = np.unique(np.asarray(list(radii), dtype=float))
    tpr, fpr = _rates_above(scores, labels, thr, inclusive_below=True)
    return _curve(thr, tpr, fpr)


def roc_sweep_omt(stream: Stream, cfg: OmtConfig, thresholds) -> RocCurve:
    """ROC over recognition thresholds; the grid is ``thresholds`` plus
    every distinct observed score, so the empirical curve is exact."""
    return roc_from_omt_scores(omt_scores(stream, cfg), stream.labels, thresholds)


def roc_sweep_nn(stream: Stream, anchors, radii) -> RocCurve:
    return roc_from_nn_scores(nn_scores(stream, anchors), stream.labels, radii)


def macro_average(runs, thresholds, kind: str) -> RocCurve:
    """Average per-stream TPR and FPR at each shared threshold.

    ``runs`` is a list of ``(scores, labels)``; ``kind`` is ``"omt"``
    (fire on score > threshold) or ``"nn"`` (fire on distance <= threshold).
    For ``"omt"`` the grid is extended by every observed score.
    """
    if kind == "omt":
        thr = _grid(thresholds, np.concatenate([np.asarray(s, float) for s, _ in runs]))
    elif kind == "nn":
        thr = np.unique(np.asarray(list(thresholds), dtype=float))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    tprs, fprs = [], []
    for s, y in runs:
        tpr, fpr = _rates_above(s, y, thr, inclusive_below=(kind == "nn"))
        tprs.append(tpr)
        fprs.append(fpr)
    return _curve(thr, np.mean(tprs, axis=0), np.mean(fprs, axis=0))


# -- cover diagnostics --------------------------------------------------------

def cover_error(history, state: CoverState) -> float:
    """Largest distance from any point of ``history`` to its closest
    representative."""
    H = np.asarray(history, dtype=np.float64)
    if H.size == 0:
        return 0.0
    H = H.reshape(-1, state.dim)
    if len(state) == 0:
        raise EmptyCoverError("cover is empty but history is not")
    V = state.vectors
    best = np.full(H.shape[0], np.inf)
    for v in V:
        np.minimum(best, np.linalg.norm(H - v, axis=1), out=best)
    return float(best.max())


@dataclass(frozen=True)
class CoverDiagnostics:
    t: int
    d_max: float
    r: float
    cover_size: int
    step_time: float  # seconds


def track_cover(vectors, cfg: OmtConfig):
    """Run the quantizer alone and yield exact cover diagnostics per step.

    Keeps every gated point and, for each, its distance to the closest
    current representative; the array is updated incrementally on
    insertions and recomputed after a repartition.
    """
    X = np.asarray(vectors, dtype=np.float64)
    state = CoverState.empty(cfg.dim, cfg.r0)
    hist = np.empty((len(X), cfg.dim))
    mind = np.empty(len(X))
    n = 0
    for t, x in enumerate(X):
        t0 = time.perf_counter()
        new = quantize_step(state, x, cfg, t=t)
        dt = time.perf_counter() - t0
        gated = np.linalg.norm(x - cfg.labeled_anchor) <= cfg.radius
        if gated:
            hist[n] = x
            n += 1
        if new is not state:
            if len(new) == len(state) + 1 and new.indices[:-1] == state.indices:
                np.minimum(mind[:n], np.linalg.norm(hist[:n] - x, axis=1), out=mind[:n])
            else:
                mind[:n] = np.inf
                for v in new.vectors:
                    np.minimum(mind[:n], np.linalg.norm(hist[:n] - v, axis=1), out=mind[:n])
        elif gated:
            mind[n - 1] = np.min(np.linalg.norm(new.vectors - x, axis=1))
        state = new
        d_max = float(mind[:n].max()) if n else 0.0
        yield CoverDiagnostics(t, d_max, state.r, len(state), dt), state


# -- timing -------------------------------------------------------------------

@dataclass
class TimingReport:
    micros: np.ndarray
    cover_size: np.ndarray
    r: np.ndarray

    def __len__(self) -> int:
        return len(self.micros)

    def early_mean(self, lo: int = 1000, hi: int = 3000) -> float:
        return float(np.mean(self.micros[lo:hi])) if len(self) > lo else math.nan

    def last_decile_mean(self) -> float:
        n = len(self)
        return float(np.mean(self.micros[n - n // 10:])) if n >= 10 else math.nan

    def summary(self) -> dict:
        if len(self) == 0:
            return {"steps": 0}
        early, late = self.early_mean(), self.last_decile_mean()
        return {
            "steps": len(self),
            "mean_micros": float(np.mean(self.micros)),
            "early_mean_micros": early,
            "last_decile_mean_micros": late,
            "ratio": late / early if early and not math.isnan(early) else math.nan,
            "final_cover_size": int(self.cover_size[-1]),
            "final_r": float(self.r[-1]),
        }

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"t": i, "micros": float(m), "cover_size": int(c), "r": float(r)}) + "\n"
            for i, (m, c, r) in enumerate(zip(self.micros, self.cover_size, self.r)))


def bench_step_time(n: int, cfg: OmtConfig, vectors=None, seed: int = 0) -> TimingReport:
    """Wall time of every ``process_step`` call over an ``n``-step stream.

    Without ``vectors`` the stream is an interleaved synthetic stream of
    ``n`` frames in ``cfg.dim`` dimensions, and the anchor of ``cfg`` is
    replaced by the synthetic anchor.
    """
    if n == 0:
        return TimingReport(np.empty(0), np.empty(0, dtype=int), np.empty(0))
    if vectors is None:
        s = synth_stream(SynthSpec(seed=seed, dim=cfg.dim, n_steps=(n + 1) // 2))
        X = s.vectors[:n]
        cfg = cfg.with_(labeled_anchor=s.anchor)
    else:
        X = np.asarray(vectors, dtype=float)[:n]
    rec = OmtRecognizer(cfg)
    micros = np.empty(len(X))
    sizes = np.empty(len(X), dtype=int)
    radii = np.empty(len(X))
    clock = time.perf_counter_ns
    for i, x in enumerate(X):
        t0 = clock()
        rec.process_step(x)
        micros[i] = (clock() - t0) / 1000.0
        sizes[i] = len(rec.cover)
        radii[i] = rec.cover.r
    return TimingReport(micros, sizes, radii)
