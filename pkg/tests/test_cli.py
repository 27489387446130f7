import csv
import json
import subprocess
import sys

import pytest

from omt.cli import EXIT_DATA, EXIT_IO, EXIT_NUMERICAL, EXIT_USAGE, main


@pytest.fixture(scope="module")
def stream_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "s.csv"
    assert main(["synth", "--seed", "7", "--steps", "1000", "--interleave", "--out", str(path)]) == 0
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_synth_row_count(stream_file):
    lines = stream_file.read_text().splitlines()
    assert lines[0].startswith("t,label,f0,")
    assert len(lines) - 1 == 2001
    assert lines[1].startswith("-1,1,")


def test_synth_deterministic(stream_file, tmp_path):
    again = tmp_path / "again.csv"
    main(["synth", "--seed", "7", "--steps", "1000", "--interleave", "--out", str(again)])
    assert again.read_bytes() == stream_file.read_bytes()


def test_synth_missing_out():
    assert main(["synth", "--seed", "7"]) == EXIT_USAGE


def test_synth_jsonl(tmp_path):
    out = tmp_path / "s.jsonl"
    assert main(["synth", "--steps", "5", "--interleave", "--out", str(out)]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert rows[0]["t"] == -1 and len(rows) == 11


def test_run_everything_outside_radius(tmp_path, capsys):
    s = tmp_path / "far.csv"
    s.write_text("t,label,f0,f1\n-1,1,1.0,0.0\n0,1,-1.0,0.0\n1,0,0.0,1.0\n2,1,0.0,-1.0\n")
    out = tmp_path / "p.csv"
    assert main(["run", "--stream", str(s), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert (summary["tpr"], summary["fpr"]) == (0.0, 0.0)
    assert all(r["gated"] == "0" for r in read_csv(out))


def test_run_golden_bytes(stream_file, tmp_path):
    outs = []
    for i in range(2):
        p, c = tmp_path / f"p{i}.csv", tmp_path / f"c{i}.csv"
        assert main(["run", "--stream", str(stream_file), "--out", str(p), "--cover-dump", str(c)]) == 0
        outs.append((p.read_bytes(), c.read_bytes()))
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "p0.csv")
    assert len(rows) == 2000
    assert set(rows[0]) == {"t", "label", "gated", "nearest", "score", "identity"}


def test_run_k_one(stream_file, tmp_path):
    diag = tmp_path / "d.jsonl"
    assert main(["run", "--stream", str(stream_file), "--k", "1", "--out", str(tmp_path / "p.csv"),
                 "--diagnostics", str(diag)]) == 0
    sizes = [json.loads(l)["cover_size"] for l in diag.read_text().splitlines()]
    assert len(sizes) == 2000 and max(sizes) <= 1


def test_run_writes_snapshot(stream_file, tmp_path):
    from omt import OmtRecognizer
    snap = tmp_path / "snap.npz"
    summ = tmp_path / "summary.json"
    assert main(["run", "--stream", str(stream_file), "--out", str(tmp_path / "p.csv"),
                 "--snapshot", str(snap), "--summary", str(summ)]) == 0
    rec = OmtRecognizer.load(snap)
    assert rec.step_count == 2000
    assert json.loads(summ.read_text())["cover_size"] == len(rec.cover)


def test_sweep_epsilon(stream_file, tmp_path):
    out = tmp_path / "roc.csv"
    assert main(["sweep", "--stream", str(stream_file), "--axis", "epsilon",
                 "--grid", "0,0.25,0.5,0.75,1", "--out", str(out)]) == 0
    rows = read_csv(out)
    thresholds = {float(r["threshold"]) for r in rows}
    assert {0.0, 0.25, 0.5, 0.75, 1.0} <= thresholds
    assert len(rows) > 5
    fprs = [float(r["fpr"]) for r in rows]
    assert fprs == sorted(fprs)


def test_sweep_k_radius_shrinks(stream_file, tmp_path):
    out = tmp_path / "k.csv"
    assert main(["sweep", "--stream", str(stream_file), "--axis", "k",
                 "--grid", "75,150,300", "--out", str(out), "--r0", "0.005"]) == 0
    rows = read_csv(out)
    rs = [float(r["final_r"]) for r in rows]
    assert [int(r["k"]) for r in rows] == [75, 150, 300]
    assert rs[0] >= rs[1] >= rs[2]


def test_sweep_radius_max_tpr_grows(stream_file, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["sweep", "--stream", str(stream_file), "--axis", "radius",
                 "--grid", "0.25,0.3,0.35", "--out", str(out), "--jobs", "2"]) == 0
    tprs = [float(r["max_tpr"]) for r in read_csv(out)]
    assert tprs[0] <= tprs[1] <= tprs[2]


def test_sweep_empty_grid(stream_file, tmp_path):
    assert main(["sweep", "--stream", str(stream_file), "--axis", "epsilon", "--grid", "",
                 "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_roc_nn(stream_file, tmp_path, capsys):
    out = tmp_path / "nn.csv"
    assert main(["roc-nn", "--stream", str(stream_file), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 201
    last = max(rows, key=lambda r: float(r["threshold"]))
    assert (float(last["tpr"]), float(last["fpr"])) == (1.0, 1.0)
    assert "auc" in json.loads(capsys.readouterr().out)


def test_roc_nn_extra_anchors(tmp_path):
    s = tmp_path / "s.csv"
    s.write_text("t,label,f0\n-1,1,0.0\n0,1,0.5\n1,0,1.0\n")
    a = tmp_path / "a.csv"
    a.write_text("t,label,f0\n-1,1,0.5\n")
    out = tmp_path / "nn.csv"
    assert main(["roc-nn", "--stream", str(s), "--anchors", str(a), "--grid", "0", "--out", str(out)]) == 0
    assert float(read_csv(out)[0]["tpr"]) == 1.0


def test_bench(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    assert main(["bench", "--steps", "100", "--dim", "16", "--k", "20", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 100
    assert json.loads(capsys.readouterr().out)["steps"] == 100


def test_config_file_and_env(stream_file, tmp_path, monkeypatch):
    conf = tmp_path / "run.conf"
    conf.write_text(f"# experiment\nstream = {stream_file}\nk = 1\nepsilon=0.9\n")
    diag = tmp_path / "d.jsonl"
    args = ["--config", str(conf), "run", "--out", str(tmp_path / "p.csv"), "--diagnostics", str(diag)]
    assert main(args) == 0
    assert max(json.loads(l)["cover_size"] for l in diag.read_text().splitlines()) == 1
    monkeypatch.setenv("OMT_K", "3")
    assert main(args) == 0
    assert max(json.loads(l)["cover_size"] for l in diag.read_text().splitlines()) == 3
    # flags win over both
    assert main(args + ["--k", "2"]) == 0
    assert max(json.loads(l)["cover_size"] for l in diag.read_text().splitlines()) == 2


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("bogus = 1\n")
    assert main(["--config", str(conf), "synth", "--out", str(tmp_path / "s.csv")]) == EXIT_USAGE


def test_invalid_config_value(stream_file, tmp_path):
    assert main(["run", "--stream", str(stream_file), "--sigma", "0",
                 "--out", str(tmp_path / "p.csv")]) == EXIT_USAGE


def test_data_error_exit(tmp_path):
    s = tmp_path / "bad.csv"
    s.write_text("t,label,f0\n-1,1,0.5\n0,1,oops\n")
    assert main(["run", "--stream", str(s), "--out", str(tmp_path / "p.csv")]) == EXIT_DATA


def test_numerical_error_exit(tmp_path):
    s = tmp_path / "s.csv"
    s.write_text("t,label,f0,f1\n-1,1,0.0,0.0\n0,1,0.2,0.0\n1,0,-0.2,0.0\n")
    code = main(["run", "--stream", str(s), "--gamma", "0", "--sigma", "0.0001", "--radius", "2",
                 "--out", str(tmp_path / "p.csv")])
    assert code == EXIT_NUMERICAL


def test_io_error_exit(stream_file, tmp_path):
    assert main(["run", "--stream", str(stream_file),
                 "--out", str(tmp_path / "missing" / "p.csv")]) == EXIT_IO


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    res = subprocess.run([sys.executable, "-m", "omt", "synth", "--steps", "3", "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert len(out.read_text().splitlines()) == 5
