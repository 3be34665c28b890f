import json
import subprocess
import sys

import numpy as np
import pytest

from mgstc.cli import main
from mgstc.datastream import load_csv

TINY = ["--history", "24", "--chunk-len", "8", "--stride", "4", "--d-model", "8",
        "--horizon", "4", "--n-heads", "2", "--n-agg", "2", "--lr", "1e-3", "--epochs", "2",
        "--split", "5:2:7", "--batch-size", "8"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    plan = {"n_series": 3, "length": 600, "period": 24,
            "events": [{"start": 450, "kind": "mean_shift", "magnitude": 4.0}]}
    (d / "plan.json").write_text(json.dumps(plan))
    assert main(["synth", "--plan", str(d / "plan.json"), "--out", str(d / "s.csv"),
                 "--seed", "2"]) == 0
    assert main(["train", "--data", str(d / "s.csv"), "--checkpoint", str(d / "m.json"),
                 "--max-steps", "20", *TINY]) == 0
    return d


def test_synth_round_trip_and_byte_identity(workdir, tmp_path):
    frame = load_csv(workdir / "s.csv")
    assert frame.values.shape == (600, 3)
    out = tmp_path / "again.csv"
    assert main(["synth", "--plan", str(workdir / "plan.json"), "--out", str(out),
                 "--seed", "2"]) == 0
    assert out.read_bytes() == (workdir / "s.csv").read_bytes()
    v = frame.values
    assert v[450:].mean() - v[:450].mean() > 3.0


def test_train_writes_log_and_is_deterministic(workdir, tmp_path, capsys):
    args = ["train", "--data", str(workdir / "s.csv"), "--max-steps", "20", *TINY]
    assert main([*args, "--checkpoint", str(tmp_path / "a.json"), "--log",
                 str(tmp_path / "log.ndjson")]) == 0
    assert main([*args, "--checkpoint", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (workdir / "m.json").read_bytes()
    rows = [json.loads(line) for line in (tmp_path / "log.ndjson").read_text().splitlines()]
    assert rows and {"epoch", "train_mse", "val_mse"} <= set(rows[0])
    assert main([*args, "--checkpoint", str(tmp_path / "c.json"), "--seed", "1"]) == 0
    assert (tmp_path / "c.json").read_bytes() != (tmp_path / "a.json").read_bytes()


def test_stream_outputs(workdir, tmp_path, capsys):
    m, d, p = tmp_path / "m.csv", tmp_path / "d.ndjson", tmp_path / "p.csv"
    rc = main(["stream", "--data", str(workdir / "s.csv"), "--checkpoint",
               str(workdir / "m.json"), "--online", "--metrics", str(m), "--drift-log", str(d),
               "--predictions", str(p), "--threshold", "0.2"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    lines = m.read_text().splitlines()
    assert lines[0] == "batch,mse,mae,cum_mse,drift"
    assert len(lines) - 1 == summary["batches"]
    for line in d.read_text().splitlines():
        rec = json.loads(line)
        assert set(rec) == {"batch_index", "z", "p_value", "drifted", "stage"}
    assert main(["eval", "--predictions", str(p), "--metrics", str(tmp_path / "e.csv")]) == 0
    ev = json.loads(capsys.readouterr().out.strip())
    assert ev["cum_mse"] == pytest.approx(summary["online_cum_mse"], rel=1e-12)
    # recomputed from the value-level file: equal up to summation order
    e_rows = np.loadtxt(tmp_path / "e.csv", delimiter=",", skiprows=1)
    m_rows = np.loadtxt(m, delimiter=",", skiprows=1)
    np.testing.assert_allclose(e_rows, m_rows, rtol=1e-12)


def test_stream_compare_and_frozen_repeat(workdir, tmp_path, capsys):
    base = ["stream", "--data", str(workdir / "s.csv"), "--checkpoint", str(workdir / "m.json")]
    assert main([*base, "--frozen", "--metrics", str(tmp_path / "f1.csv")]) == 0
    assert main([*base, "--frozen", "--metrics", str(tmp_path / "f2.csv")]) == 0
    assert (tmp_path / "f1.csv").read_bytes() == (tmp_path / "f2.csv").read_bytes()
    capsys.readouterr()
    assert main([*base, "--compare", "--frozen-metrics", str(tmp_path / "f3.csv")]) == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert {"online_cum_mse", "frozen_cum_mse", "relative_improvement"} <= set(out)
    assert (tmp_path / "f3.csv").read_bytes() == (tmp_path / "f1.csv").read_bytes()


def test_stream_tiny_threshold_logs_no_drift(workdir, tmp_path):
    frame = load_csv(workdir / "s.csv")
    rng = np.random.default_rng(0)
    stationary = frame.with_values(rng.normal(size=frame.values.shape))
    from mgstc.datastream import write_csv
    write_csv(stationary, tmp_path / "flat.csv")
    d = tmp_path / "d.ndjson"
    assert main(["train", "--data", str(tmp_path / "flat.csv"), "--checkpoint",
                 str(tmp_path / "m.json"), "--max-steps", "10", *TINY]) == 0
    assert main(["stream", "--data", str(tmp_path / "flat.csv"), "--checkpoint",
                 str(tmp_path / "m.json"), "--threshold", "1e-9", "--lr", "1e-4",
                 "--drift-log", str(d)]) == 0
    assert not any(json.loads(line)["drifted"] for line in d.read_text().splitlines())


def test_denormalized_metrics_scale(workdir, tmp_path):
    base = ["stream", "--data", str(workdir / "s.csv"), "--checkpoint", str(workdir / "m.json"),
            "--frozen", "--max-batches", "5"]
    assert main([*base, "--metrics", str(tmp_path / "n.csv")]) == 0
    assert main([*base, "--metrics", str(tmp_path / "r.csv"), "--denormalize-metrics",
                 "true"]) == 0
    n = np.loadtxt(tmp_path / "n.csv", delimiter=",", skiprows=1)
    r = np.loadtxt(tmp_path / "r.csv", delimiter=",", skiprows=1)
    assert np.all(r[:, 1] > n[:, 1])


def test_config_file_and_override(workdir, tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("d_model = 16  # width\nhorizon = 8\n")
    assert main(["config", "--config", str(cfg), "--horizon", "4"]) == 0
    text = capsys.readouterr().out
    assert "d_model = 16\n" in text and "horizon = 4\n" in text


def test_exit_codes(workdir, tmp_path, capsys):
    s, ck = str(workdir / "s.csv"), str(workdir / "m.json")
    # usage and configuration problems
    assert main(["stream", "--data", s, "--checkpoint", ck, "--d-model", "16"]) == 1
    assert "d_model" in capsys.readouterr().err
    assert main(["train", "--data", s, "--checkpoint", str(tmp_path / "x"), "--d-model", "7"]) == 1
    assert main(["train", "--data", s, "--checkpoint", str(tmp_path / "x"),
                 "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["train", "--data", s, "--checkpoint", str(tmp_path / "x"), "--use-fgsa",
                 "maybe"]) == 1
    assert main(["verify-appendix", "--trials", "0"]) == 1
    assert main(["synth", "--out", str(tmp_path / "y.csv"), "--n-series", "2", "--length", "50",
                 "--plan", str(_plan(tmp_path, {"events": [{"start": 1, "kind": "bad",
                                                            "magnitude": 1}]}))]) == 1
    with pytest.raises(SystemExit) as info:
        main(["train", "--nonsense"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1
    # malformed data
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,a\n0,1\n600,x\n")
    assert main(["train", "--data", str(bad), "--checkpoint", str(tmp_path / "x")]) == 2
    assert main(["eval", "--predictions", str(bad)]) == 2
    # numeric fault
    nanp = tmp_path / "nan.csv"
    nanp.write_text("batch,prediction,target\n0,nan,1\n")
    assert main(["eval", "--predictions", str(nanp)]) == 3


def _plan(tmp_path, obj):
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(obj))
    return p


def test_numeric_fault_during_training(tmp_path):
    big = tmp_path / "big.csv"
    t = np.arange(400)
    vals = np.stack([np.sin(t / 5.0), np.cos(t / 7.0)], axis=1)
    from mgstc.datastream import TrafficFrame, write_csv
    write_csv(TrafficFrame.from_array(vals), big)
    rc = main(["train", "--data", str(big), "--checkpoint", str(tmp_path / "m.json"),
               "--max-steps", "3", *TINY[:-4], "--lr", "1e300", "--split", "5:2:7"])
    assert rc == 3


def test_verify_appendix_worked_example(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify-appendix", "--trials", "1", "--seed", "0", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert round(rep["worked_example"]["gap_plain"], 4) == 0.3333
    assert round(rep["worked_example"]["gap_augmented"], 4) == 0.1556
    capsys.readouterr()
    main(["verify-appendix", "--trials", "50", "--seed", "4"])
    a = capsys.readouterr().out
    main(["verify-appendix", "--trials", "50", "--seed", "4"])
    assert capsys.readouterr().out == a


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "mgstc.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "mgstc" in out.stdout
