"""Command-line front end.

Subcommands: ``synth``, ``run``, ``sweep``, ``bench`` and ``roc-nn``.
Settings come from built-in defaults, then a ``--config`` file of
``key=value`` lines, then ``OMT_<KEY>`` environment variables, then flags.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ._io import atomic_write_text
from .core import (DEFAULT_EPSILON, DEFAULT_GAMMA, DEFAULT_K, DEFAULT_R0,
                   DEFAULT_RADIUS, DEFAULT_SIGMA, NumericalError, OmtConfig)
from .evaluation import (bench_step_time, confusion, omt_scores, roc_from_nn_scores,
                         roc_from_omt_scores, nn_scores, smallest_nonzero_fpr_point)
from .recognizer import OmtRecognizer
from .streams import StreamFormatError, SynthSpec, emit, ingest, synth_stream

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

ENV_PREFIX = "OMT_"
BOOL_KEYS = {"interleave"}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return vals


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _omt_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("recognizer")
    g.add_argument("--radius", type=float, default=DEFAULT_RADIUS, help="generalization radius R")
    g.add_argument("--k", type=int, default=DEFAULT_K, help="maximum number of representatives")
    g.add_argument("--r0", type=float, default=DEFAULT_R0, help="initial cover radius")
    g.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="heat parameter")
    g.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="sink weight")
    g.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="recognition threshold")


def _synth_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic stream")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--steps", type=int, default=2000, help="number of target frames")
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--distractors", type=int, default=42, help="number of distractor clusters")
    g.add_argument("--interleave", type=_bool, nargs="?", const=True, default=False,
                   help="insert one distractor frame after every target frame")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omt", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="file of key=value lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labeled stream")
    _synth_flags(p)
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="replay a stream through the recognizer")
    p.add_argument("--stream", required=True)
    _omt_flags(p)
    p.add_argument("--out", required=True, help="per-step predictions CSV")
    p.add_argument("--diagnostics", help="per-step JSONL {t, micros, cover_size, r}")
    p.add_argument("--cover-dump", help="final cover as CSV")
    p.add_argument("--snapshot", help="final recognizer state (.npz)")
    p.add_argument("--summary", help="summary JSON")

    p = sub.add_parser("sweep", help="parameter sweep")
    p.add_argument("--stream", required=True)
    p.add_argument("--axis", choices=["epsilon", "radius", "k"], required=True)
    p.add_argument("--grid", type=_floats, required=True, help="comma-separated values")
    _omt_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("roc-nn", help="nearest-neighbor baseline ROC over radii")
    p.add_argument("--stream", required=True)
    p.add_argument("--anchors", help="stream-format file of extra labeled vectors (same raw scale)")
    p.add_argument("--grid", type=_floats, help="radii (default 201 values in [0, 2])")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="per-step timing on a synthetic stream")
    _omt_flags(p)
    p.add_argument("--steps", type=int, default=20000, help="number of frames")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="per-step timing JSONL")
    p.add_argument("--summary", help="summary JSON")
    return parser


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_overrides(parser, argv) -> None:
    """Install config-file and environment values as subcommand defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if command is None or command not in ("synth", "run", "sweep", "roc-nn", "bench"):
        return
    sp = _subparser(parser, command)
    dests = {a.dest for a in sp._actions if a.dest != "help"}
    overrides: dict[str, str] = {}
    if known.config:
        cfg = read_config_file(known.config)
        unknown = sorted(set(cfg) - dests)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        overrides.update(cfg)
    for dest in dests:
        env = os.environ.get(ENV_PREFIX + dest.upper())
        if env is not None:
            overrides[dest] = env
    defaults = {}
    for action in sp._actions:
        if action.dest in overrides:
            val = overrides[action.dest]
            # argparse converts string defaults with the action's type
            defaults[action.dest] = val
            action.required = False
    sp.set_defaults(**defaults)


def _omt_config(args, anchor) -> OmtConfig:
    try:
        return OmtConfig(anchor, radius=args.radius, k=args.k, r0=args.r0,
                         sigma=args.sigma, gamma=args.gamma, epsilon=args.epsilon)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- subcommands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        spec = SynthSpec(seed=args.seed, dim=args.dim, n_steps=args.steps,
                         n_distractors=args.distractors, interleave=_bool(args.interleave))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    emit(synth_stream(spec), args.out, args.format)
    return EXIT_OK


def _rates(pred, labels) -> tuple[float, float] | None:
    try:
        return confusion(pred, labels)
    except ValueError:
        return None


def cmd_run(args) -> int:
    stream = ingest(args.stream)
    cfg = _omt_config(args, stream.anchor)
    rec = OmtRecognizer(cfg)
    pred = io.StringIO()
    pred.write("t,label,gated,nearest,score,identity\n")
    diag = io.StringIO() if args.diagnostics else None
    ys = np.empty(len(stream), dtype=int)
    for i, (t, x, y) in enumerate(stream):
        t0 = time.perf_counter_ns()
        p = rec.process_step(x)
        micros = (time.perf_counter_ns() - t0) / 1000.0
        ys[i] = p.identity
        nearest = "" if p.nearest_index is None else str(rec.cover.indices[p.nearest_index])
        score = "" if p.score is None else repr(p.score)
        pred.write(f"{t},{y},{int(p.gated)},{nearest},{score},{p.identity}\n")
        if diag is not None:
            diag.write(json.dumps({"t": t, "micros": micros, "cover_size": len(rec.cover),
                                   "r": rec.cover.r}) + "\n")
    atomic_write_text(args.out, pred.getvalue())
    if diag is not None:
        atomic_write_text(args.diagnostics, diag.getvalue())
    if args.cover_dump:
        rec.cover.dump_csv(args.cover_dump)
    if args.snapshot:
        rec.save(args.snapshot)
    rates = _rates(ys, stream.labels)
    summary = {
        "steps": len(stream), "epsilon": cfg.epsilon,
        "tpr": rates[0] if rates else None, "fpr": rates[1] if rates else None,
        "cover_size": len(rec.cover), "cover_radius": rec.cover.r,
    }
    if args.summary:
        atomic_write_text(args.summary, json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def _sweep_point(stream, cfg, axis, value):
    if axis == "radius":
        cfg = cfg.with_(radius=value)
    else:
        cfg = cfg.with_(k=int(value))
    t0 = time.perf_counter()
    rec = OmtRecognizer(cfg)
    scores = omt_scores(stream, cfg, rec)
    elapsed = time.perf_counter() - t0
    curve = roc_from_omt_scores(scores, stream.labels, [-1.0])
    gate = max(curve.points, key=lambda p: (p.tpr, p.fpr))
    return {
        "value": value, "auc": curve.auc, "max_tpr": gate.tpr, "max_fpr": gate.fpr,
        "tpr_at_fpr_0.01": curve.tpr_at_fpr(0.01),
        "final_r": rec.cover.r, "final_cover_size": len(rec.cover),
        "mean_step_micros": 1e6 * elapsed / max(len(stream), 1),
    }


def cmd_sweep(args) -> int:
    if not args.grid:
        raise UsageError("empty grid")
    stream = ingest(args.stream)
    cfg = _omt_config(args, stream.anchor)
    if args.axis == "epsilon":
        curve = roc_from_omt_scores(omt_scores(stream, cfg), stream.labels, args.grid)
        curve.write_csv(args.out)
        print(json.dumps({"auc": curve.auc, "points": len(curve.points)}))
        return EXIT_OK
    if args.axis == "k" and any(v != int(v) or v < 1 for v in args.grid):
        raise UsageError("k grid must hold positive integers")
    if args.axis == "radius" and any(not v > 0 for v in args.grid):
        raise UsageError("radius grid must hold positive values")
    n = len(args.grid)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_point, [stream] * n, [cfg] * n, [args.axis] * n, args.grid))
    else:
        rows = [_sweep_point(stream, cfg, args.axis, v) for v in args.grid]
    cols = [args.axis, "auc", "max_tpr", "max_fpr", "tpr_at_fpr_0.01", "final_r",
            "final_cover_size", "mean_step_micros"]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for row in rows:
        vals = [int(row["value"]) if args.axis == "k" else row["value"]] + [row[c] for c in cols[1:]]
        out.write(",".join(repr(v) for v in vals) + "\n")
    atomic_write_text(args.out, out.getvalue())
    return EXIT_OK


def cmd_roc_nn(args) -> int:
    stream = ingest(args.stream)
    anchors = [stream.anchor]
    if args.anchors:
        extra = ingest(args.anchors, normalize=False)
        anchors += [extra.anchor * stream.scale] + [v * stream.scale for v in extra.vectors]
    grid = args.grid if args.grid else list(np.linspace(0.0, 2.0, 201))
    if not grid:
        raise UsageError("empty grid")
    curve = roc_from_nn_scores(nn_scores(stream, np.array(anchors)), stream.labels, grid)
    curve.write_csv(args.out)
    best = smallest_nonzero_fpr_point(curve)
    print(json.dumps({"auc": curve.auc, "tpr_at_fpr_0.01": curve.tpr_at_fpr(0.01),
                      "smallest_nonzero_fpr": None if best is None else
                      {"fpr": best.fpr, "tpr": best.tpr}}))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _omt_config(args, np.zeros(args.dim))
    rep = bench_step_time(args.steps, cfg, seed=args.seed)
    if args.out:
        atomic_write_text(args.out, rep.to_jsonl())
    summary = rep.summary()
    if args.summary:
        atomic_write_text(args.summary, json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "sweep": cmd_sweep,
            "roc-nn": cmd_roc_nn, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_overrides(parser, argv)
    except (UsageError, OSError) as exc:
        print(f"omt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"omt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StreamFormatError as exc:
        print(f"omt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"omt: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"omt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"omt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
