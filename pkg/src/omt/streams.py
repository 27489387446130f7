"""Stream files and synthetic evaluation streams.

File formats
------------
CSV: header ``t,label,f0,f1,...``; the labeled anchor is the row with
``t = -1`` (label 1). JSONL: one object per line with keys ``t``, ``label``
and ``x`` (list of floats), anchor again at ``t = -1``. Floats are written
with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._io import atomic_write_text
from .core import OmtError, normalize_dataset

ANCHOR_T = -1


class StreamFormatError(OmtError, ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class StreamRecord(NamedTuple):
    t: int
    vector: np.ndarray
    true_label: int


@dataclass(eq=False)
class Stream:
    """A labeled anchor plus an ordered sequence of labeled vectors.

    ``labels`` are for evaluation only; recognizers never see them.
    ``scale`` is the normalization factor already applied to every vector.
    """

    anchor: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray
    times: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64).reshape(-1, self.anchor.size)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.int64)
        if not (len(self.vectors) == len(self.labels) == len(self.times)):
            raise ValueError("vectors, labels and times must have equal length")

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        for t, x, y in zip(self.times, self.vectors, self.labels):
            yield StreamRecord(int(t), x, int(y))

    @property
    def records(self) -> list[StreamRecord]:
        return list(self)

    @property
    def dim(self) -> int:
        return self.anchor.size


def _normalized(anchor, vectors, labels, times) -> Stream:
    X = np.vstack([anchor[None, :], vectors]) if len(vectors) else anchor[None, :]
    scaled, factor = normalize_dataset(X)
    return Stream(scaled[0], scaled[1:], labels, times, factor)


def _parse_float(s: str, lineno: int) -> float:
    try:
        v = float(s)
    except ValueError:
        raise StreamFormatError(f"non-numeric field {s!r}", lineno) from None
    if not math.isfinite(v):
        raise StreamFormatError(f"non-finite value {s!r}", lineno)
    return v


def _parse_int(s, lineno: int, name: str) -> int:
    try:
        if isinstance(s, bool):
            raise ValueError
        if isinstance(s, str):
            return int(s.strip())
        if isinstance(s, float) and not s.is_integer():
            raise ValueError
        return int(s)
    except (TypeError, ValueError):
        raise StreamFormatError(f"field {name!r} is not an integer: {s!r}", lineno) from None


def _collect(rows, dim: int | None):
    """rows: iterable of (lineno, t, label, values)."""
    anchor = None
    vecs, labels, times = [], [], []
    last_t = None
    for lineno, t, label, x in rows:
        if dim is None:
            dim = len(x)
        if len(x) != dim or dim == 0:
            raise StreamFormatError(f"expected {dim} features, got {len(x)}", lineno)
        if t == ANCHOR_T:
            if anchor is not None:
                raise StreamFormatError("more than one anchor row", lineno)
            if label != 1:
                raise StreamFormatError("anchor row must have label 1", lineno)
            anchor = np.array(x)
            continue
        if t < 0:
            raise StreamFormatError(f"negative time {t}", lineno)
        if last_t is not None and t <= last_t:
            raise StreamFormatError(f"time {t} does not increase (previous {last_t})", lineno)
        last_t = t
        vecs.append(x)
        labels.append(label)
        times.append(t)
    if anchor is None:
        raise StreamFormatError("no anchor row (t = -1)")
    return anchor, np.array(vecs, dtype=np.float64).reshape(-1, len(anchor)), labels, times


def _csv_rows(text: str):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise StreamFormatError("empty file", 1) from None
    if header[:2] != ["t", "label"] or len(header) < 3:
        raise StreamFormatError("header must be t,label,f0,...", 1)
    dim = len(header) - 2
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != dim + 2:
            raise StreamFormatError(f"expected {dim + 2} fields, got {len(row)}", lineno)
        yield (lineno, _parse_int(row[0], lineno, "t"), _parse_int(row[1], lineno, "label"),
               [_parse_float(v, lineno) for v in row[2:]])


def _jsonl_rows(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict) or not {"t", "label", "x"} <= obj.keys():
            raise StreamFormatError("object needs keys t, label, x", lineno)
        if not isinstance(obj["x"], list):
            raise StreamFormatError("x must be an array", lineno)
        x = []
        for v in obj["x"]:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise StreamFormatError(f"non-numeric field {v!r}", lineno)
            if not math.isfinite(v):
                raise StreamFormatError(f"non-finite value {v!r}", lineno)
            x.append(float(v))
        yield (lineno, _parse_int(obj["t"], lineno, "t"),
               _parse_int(obj["label"], lineno, "label"), x)


def detect_format(path) -> str:
    return "jsonl" if Path(path).suffix.lower() in (".jsonl", ".json", ".ndjson") else "csv"


def ingest(path, format: str | None = None, normalize: bool = True) -> Stream:
    """Read a stream file.

    With ``normalize`` (the default) the anchor and all vectors are scaled
    together so the largest norm is 1; the factor is kept in ``Stream.scale``.
    """
    fmt = format or detect_format(path)
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "csv":
        rows = _csv_rows(text)
    elif fmt == "jsonl":
        rows = _jsonl_rows(text)
    else:
        raise ValueError(f"unknown stream format {fmt!r}")
    anchor, X, labels, times = _collect(rows, None)
    if normalize:
        try:
            return _normalized(anchor, X, labels, times)
        except ValueError as exc:
            raise StreamFormatError(str(exc)) from None
    return Stream(anchor, X, labels, times)


def format_stream(stream: Stream, format: str = "csv") -> str:
    rows = [(ANCHOR_T, 1, stream.anchor)] + [(int(t), int(y), x) for t, x, y in
                                           zip(stream.times, stream.vectors, stream.labels)]
    out = io.StringIO()
    if format == "csv":
        out.write(",".join(["t", "label"] + [f"f{i}" for i in range(stream.dim)]) + "\n")
        for t, y, x in rows:
            out.write(",".join([str(t), str(y)] + [repr(float(v)) for v in x]) + "\n")
    elif format == "jsonl":
        for t, y, x in rows:
            out.write(json.dumps({"t": t, "label": y, "x": [float(v) for v in x]}) + "\n")
    else:
        raise ValueError(f"unknown stream format {format!r}")
    return out.getvalue()


def emit(stream: Stream, path, format: str | None = None) -> None:
    atomic_write_text(path, format_stream(stream, format or detect_format(path)))


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic evaluation stream.

    The target is a smooth random walk on a curved two-dimensional sheet
    through the anchor. Distractors come from ``n_distractors`` clusters,
    each a small patch of its own sheet offset from the anchor in a random
    direction. Lengths are in raw units before the final rescale to unit
    maximum norm.
    """

    seed: int = 0
    dim: int = 64
    n_steps: int = 2000
    step_size: float = 0.02
    momentum: float = 0.9
    extent: float = 0.22
    curvature: float = 0.5
    noise: float = 0.008
    n_distractors: int = 42
    distractor_spread: float = 0.03
    distractor_offset: tuple[float, float] = (0.15, 0.6)
    center_norm: float = 0.7
    interleave: bool = True

    def __post_init__(self):
        for name in ("step_size", "extent", "curvature", "noise", "distractor_spread", "center_norm"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.dim < 3:
            raise ValueError("dim must be at least 3")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        lo, hi = self.distractor_offset
        if not 0 <= lo <= hi:
            raise ValueError("distractor_offset must satisfy 0 <= lo <= hi")
        if self.interleave and self.n_distractors < 1:
            raise ValueError("interleaving needs at least one distractor cluster")


def _orthonormal(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    return q


def _sheet(basis: np.ndarray, z: np.ndarray, curvature: float) -> np.ndarray:
    """Embed latent points ``z`` (n, 2) on the sheet x = B0 z + B1 * c |z|^2."""
    bend = curvature * np.sum(z * z, axis=1)
    return z @ basis[:, :2].T + bend[:, None] * basis[:, 2][None, :]


def synth_stream(spec: SynthSpec) -> Stream:
    """Deterministic labeled stream (target label 1, distractors 0).

    All randomness comes from a PCG64 generator seeded with ``spec.seed``.
    With ``interleave`` every target frame is followed by one distractor
    frame, so labels alternate and half the frames are negatives.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    dim = spec.dim
    per_coord = spec.noise / math.sqrt(dim)

    center = rng.standard_normal(dim)
    center *= spec.center_norm / np.linalg.norm(center)
    basis = _orthonormal(rng, dim, 3)

    # target: momentum walk in a reflecting latent box
    z = np.zeros((spec.n_steps, 2))
    pos = np.zeros(2)
    vel = np.zeros(2)
    kick = spec.step_size * math.sqrt(1.0 - spec.momentum ** 2)
    for i in range(spec.n_steps):
        vel = spec.momentum * vel + kick * rng.standard_normal(2)
        pos = pos + vel
        for a in range(2):
            if pos[a] > spec.extent:
                pos[a] = 2 * spec.extent - pos[a]
                vel[a] = -vel[a]
            elif pos[a] < -spec.extent:
                pos[a] = -2 * spec.extent - pos[a]
                vel[a] = -vel[a]
        z[i] = pos
    targets = center + _sheet(basis, z, spec.curvature)
    targets += per_coord * rng.standard_normal(targets.shape)
    anchor = center + per_coord * rng.standard_normal(dim)

    X = targets
    labels = np.ones(spec.n_steps, dtype=np.int64)
    if spec.interleave:
        lo, hi = spec.distractor_offset
        offsets = rng.standard_normal((spec.n_distractors, dim))
        offsets *= (rng.uniform(lo, hi, spec.n_distractors)
                    / np.linalg.norm(offsets, axis=1))[:, None]
        bases = [_orthonormal(rng, dim, 3) for _ in range(spec.n_distractors)]
        which = rng.integers(0, spec.n_distractors, spec.n_steps)
        zs = rng.uniform(-spec.distractor_spread, spec.distractor_spread, (spec.n_steps, 2))
        distractors = np.empty((spec.n_steps, dim))
        for c in range(spec.n_distractors):
            sel = which == c
            distractors[sel] = center + offsets[c] + _sheet(bases[c], zs[sel], spec.curvature)
        distractors += per_coord * rng.standard_normal(distractors.shape)
        X = np.empty((2 * spec.n_steps, dim))
        X[0::2] = targets
        X[1::2] = distractors
        labels = np.tile(np.array([1, 0], dtype=np.int64), spec.n_steps)
    return _normalized(anchor, X, labels, np.arange(len(labels)))
