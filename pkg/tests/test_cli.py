import csv
import json

import pytest

from artifact.cli import HEADER, config_hash, main, read_config


def _run_dir(out):
    (d,) = [p for p in out.iterdir() if p.is_dir()]
    return d


def test_green_suite_passes(tmp_path, capsys):
    assert main(["run", "green", "--out", str(tmp_path)]) == 0
    d = _run_dir(tmp_path)
    assert d.name.startswith("green-") and len(d.name) == len("green-") + 12
    lines = [l for l in (d / "report.csv").read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.reader(lines))
    assert tuple(rows[0]) == HEADER
    assert rows[1:] and all(r[-1] == "true" for r in rows[1:])
    assert [r[0] for r in rows[1:]] == sorted(r[0] for r in rows[1:])
    summary = json.loads((d / "summary.json").read_text())
    assert summary["failed"] == [] and summary["suite"] == "green"
    assert "checks passed" in capsys.readouterr().out


def test_suite_flag_and_reruns_are_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--suite", "wick", "--seed", "3", "--out", str(a)]) == 0
    assert main(["run", "wick", "--seed", "3", "--out", str(b)]) == 0
    da, db = _run_dir(a), _run_dir(b)
    assert da.name == db.name
    for f in ("report.csv", "summary.json"):
        assert (da / f).read_bytes() == (db / f).read_bytes()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nmeasure.kind = riesz\nmeasure.alpha = 0.5\nseed = 7\nout = somewhere\n")
    parsed = read_config(cfg)
    assert parsed == {"measure.kind": "riesz", "measure.alpha": 0.5, "seed": 7, "out": "somewhere"}
    assert main(["run", "s2", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    header = (_run_dir(tmp_path / "o") / "report.csv").read_text().splitlines()
    assert "# measure.kind = riesz" in header and "# seed = 7" in header


def test_hash_ignores_output_location():
    base = {"seed": 1, "mc": 10}
    assert config_hash(dict(base, out="x"), "green") == config_hash(dict(base, out="y"), "green")
    assert config_hash(base, "green") != config_hash(base, "wick")
    assert config_hash(base, "green") != config_hash(dict(base, seed=2), "green")


def test_bad_inputs(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "nope"])
    assert main(["run"]) == 2
    assert main(["run", "green", "--mc", "1", "--out", str(tmp_path)]) == 2
    assert main(["run", "green", "--config", str(tmp_path / "missing.cfg")]) == 2
