import json

import numpy as np
import pytest

from omt import CoverState, NnRecognizer, OmtConfig, OmtRecognizer
from omt.evaluation import (RocCurve, RocPoint, bench_step_time, confusion, cover_error,
                            macro_average, omt_scores, roc_from_nn_scores, roc_from_omt_scores,
                            roc_sweep_nn, roc_sweep_omt, smallest_nonzero_fpr_point,
                            tpr_at_fpr, track_cover, trapezoid_auc)
from omt.quantizer import EmptyCoverError
from omt.streams import SynthSpec, synth_stream


@pytest.fixture(scope="module")
def stream():
    return synth_stream(SynthSpec(seed=21, n_steps=600, dim=32))


def test_confusion_cases():
    y = [1, 0, 1, 0, 1]
    assert confusion(y, y) == (1.0, 0.0)
    assert confusion([1] * 5, y) == (1.0, 1.0)
    assert confusion([1 - v for v in y], y) == (0.0, 1.0)


def test_confusion_needs_both_classes():
    with pytest.raises(ValueError):
        confusion([1, 0], [1, 1])
    with pytest.raises(ValueError):
        confusion([1, 0], [0, 0])


def test_omt_epsilon_one_fires_nothing(stream):
    cfg = OmtConfig(stream.anchor)
    c = roc_sweep_omt(stream, cfg, [1.0])
    p = next(p for p in c.points if p.threshold == 1.0)
    assert (p.tpr, p.fpr) == (0.0, 0.0)


def test_omt_epsilon_minus_one_is_nn_gate_point(stream):
    cfg = OmtConfig(stream.anchor)
    c = roc_sweep_omt(stream, cfg, [-1.0])
    p = next(p for p in c.points if p.threshold == -1.0)
    nn = NnRecognizer([stream.anchor], cfg.radius)
    expected = confusion([nn.nn_classify(x) for x in stream.vectors], stream.labels)
    assert (p.tpr, p.fpr) == expected


def test_single_replay_equals_fresh_replay_per_threshold(stream):
    cfg = OmtConfig(stream.anchor)
    curve = roc_sweep_omt(stream, cfg, [0.0, 0.1, 0.5])
    for eps in (0.0, 0.1, 0.5):
        rec = OmtRecognizer(cfg.with_(epsilon=eps))
        ys = [rec.process_step(x).identity for x in stream.vectors]
        p = next(p for p in curve.points if p.threshold == eps)
        assert (p.tpr, p.fpr) == confusion(ys, stream.labels)


def test_threshold_grid_includes_observed_scores(stream):
    cfg = OmtConfig(stream.anchor)
    s = omt_scores(stream, cfg)
    c = roc_sweep_omt(stream, cfg, [0, 0.25, 0.5, 0.75, 1])
    observed = set(s[np.isfinite(s)].tolist())
    assert len(c.points) == len(observed | {0.0, 0.25, 0.5, 0.75, 1.0})
    assert [p.fpr for p in c.points] == sorted(p.fpr for p in c.points)


def test_omt_beats_nn_on_default_benchmark(stream):
    cfg = OmtConfig(stream.anchor)
    omt = roc_sweep_omt(stream, cfg, [-1.0])
    nn = roc_sweep_nn(stream, [stream.anchor], np.linspace(0, 2, 201))
    assert omt.auc > nn.auc


def test_nn_sweep_extremes_and_monotone(stream):
    c = roc_sweep_nn(stream, [stream.anchor], np.linspace(0, 2, 51))
    by_r = sorted(c.points, key=lambda p: p.threshold)
    assert (by_r[0].tpr, by_r[0].fpr) == (0.0, 0.0)
    assert (by_r[-1].tpr, by_r[-1].fpr) == (1.0, 1.0)
    assert all(a.tpr <= b.tpr and a.fpr <= b.fpr for a, b in zip(by_r, by_r[1:]))


def test_nn_radius_zero_fires_only_on_exact_anchor_match():
    anchor = np.array([0.5, 0.0])
    scores = NnRecognizer([anchor], 0).scores(np.array([[0.5, 0.0], [0.5, 1e-12], [0.0, 0.0]]))
    c = roc_from_nn_scores(scores, [1, 1, 0], [0.0])
    assert (c.points[0].tpr, c.points[0].fpr) == (0.5, 0.0)


def test_auc_perfect_and_random():
    y = np.array([1] * 50 + [0] * 50)
    c = roc_from_omt_scores(y.astype(float), y, [])
    assert c.auc == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 10_000)
    c = roc_from_omt_scores(rng.uniform(size=10_000), y, [])
    assert abs(c.auc - 0.5) <= 0.05


def test_auc_closes_partial_curve_to_one_one():
    # a single operating point (0, 0.5): area = 0.5 + 0.5 * 0.5 / 2 ... by hand
    assert trapezoid_auc([0.0], [0.5]) == pytest.approx(0.75)
    assert trapezoid_auc([0.5], [0.5]) == pytest.approx(0.5)


def test_tpr_at_fpr_interpolates():
    assert tpr_at_fpr([0.0, 0.2], [0.4, 0.8], 0.1) == pytest.approx(0.6)
    # vertical step at fpr 0: take the top
    assert tpr_at_fpr([0.0], [0.7], 0.0) == pytest.approx(0.7)


def test_smallest_nonzero_fpr_point():
    c = RocCurve([RocPoint(0.9, 0.2, 0.0), RocPoint(0.5, 0.6, 0.01), RocPoint(0.4, 0.7, 0.01),
                  RocPoint(0.1, 0.9, 0.3)])
    p = smallest_nonzero_fpr_point(c)
    assert (p.fpr, p.tpr) == (0.01, 0.7)


def test_macro_average_matches_manual():
    runs = [(np.array([0.9, 0.1, 0.8, 0.2]), np.array([1, 0, 1, 0])),
            (np.array([0.4, 0.6]), np.array([1, 0]))]
    c = macro_average(runs, [0.5], "omt")
    p = next(p for p in c.points if p.threshold == 0.5)
    assert (p.tpr, p.fpr) == (0.5, 0.5)
    c = macro_average([(np.array([0.1, 0.5]), np.array([1, 0]))], [0.2], "nn")
    assert (c.points[0].tpr, c.points[0].fpr) == (1.0, 0.0)


def test_roc_csv_format(stream, tmp_path):
    c = roc_sweep_nn(stream, [stream.anchor], [0.1, 0.2])
    path = tmp_path / "roc.csv"
    c.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr"
    assert len(lines) == 3


def test_cover_error_zero_when_history_is_cover():
    pts = [[0.0, 0.0], [0.5, 0.0]]
    s = CoverState.from_vectors([0, 1], pts, 0.1)
    assert cover_error(pts, s) == 0.0


def test_cover_error_empty_cover_raises():
    with pytest.raises(EmptyCoverError):
        cover_error([[0.0]], CoverState.empty(1, 0.1))


def test_track_cover_matches_bruteforce(stream):
    cfg = OmtConfig(stream.anchor, k=8, r0=0.01, radius=0.5)
    history = []
    for x, (diag, state) in zip(stream.vectors[:400], track_cover(stream.vectors[:400], cfg)):
        if np.linalg.norm(x - cfg.labeled_anchor) <= cfg.radius:
            history.append(x)
        expected = cover_error(history, state) if history else 0.0
        assert diag.d_max == pytest.approx(expected, abs=1e-15)
        assert diag.d_max <= 2 * diag.r
        assert diag.cover_size == len(state) <= cfg.k


def test_bench_empty_and_report():
    cfg = OmtConfig(np.zeros(16), k=30)
    assert len(bench_step_time(0, cfg)) == 0
    assert bench_step_time(0, cfg).summary() == {"steps": 0}
    rep = bench_step_time(200, cfg)
    assert len(rep) == 200
    lines = rep.to_jsonl().splitlines()
    assert set(json.loads(lines[0])) == {"t", "micros", "cover_size", "r"}
    assert rep.cover_size.max() <= 30


def _inference_micros(k, reps=200):
    import time
    from omt import infer_identity
    rng = np.random.default_rng(0)
    cfg = OmtConfig(np.zeros(3), radius=1.0, r0=1e-6, k=k)
    rec = OmtRecognizer(cfg)
    for x in rng.uniform(-0.5, 0.5, size=(k, 3)):
        rec.process_step(x)
    assert len(rec.cover) == k
    q = rng.uniform(-0.5, 0.5, size=3)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        infer_identity(rec.cover, q, cfg)
        times.append((time.perf_counter_ns() - t0) / 1000)
    return float(np.median(times))


def test_inference_time_grows_when_k_doubles():
    small, large = _inference_micros(150), _inference_micros(300)
    assert small < large <= 10 * small
