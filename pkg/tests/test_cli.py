import csv
import json

import pytest

from dramleak.cli import main
from dramleak.observations import load_observations


def run(tmp_path, *args, out="out", config=None):
    argv = list(args) + ["--out", str(tmp_path / out)]
    if config is not None:
        path = tmp_path / "cfg.toml"
        path.write_text(config)
        argv += ["--config", str(path)]
    return main(argv)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_deterministic(tmp_path):
    for out in ("a", "b"):
        assert run(tmp_path, "simulate", "--profile", "D1", "--mechanism", "rowhammer",
                   "--seed", "7", "--pattern", "111", out=out) == 0
    a = (tmp_path / "a" / "observations.csv").read_bytes()
    assert a == (tmp_path / "b" / "observations.csv").read_bytes()
    assert len(load_observations(tmp_path / "a" / "observations.csv")) == 1000
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["runs"][0]["budget"] == 15_000_000
    assert "numpy" in manifest["versions"]


def test_simulate_rowpress_budget(tmp_path):
    assert run(tmp_path, "simulate", "--mechanism", "rowpress", "--pattern", "010",
               config="[run]\nn = 20\n") == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["runs"][0]["budget"] == 1_500_000


def test_simulate_retention_censored(tmp_path):
    cfg = "[run]\nn = 200\nretention_max_s = 1.0\nretention_t0_s = 0.25\n"
    assert run(tmp_path, "simulate", "--mechanism", "retention", config=cfg) == 0
    obs = load_observations(tmp_path / "out" / "observations.csv")
    censored = [o for o in obs if not o.flipped]
    assert censored and all(o.t_lo == 1.0 and o.t_hi is None for o in censored)


def test_bad_config_exit_code_and_no_output(tmp_path):
    assert run(tmp_path, "simulate", config="[run]\nbogus = 1\n") == 2
    assert run(tmp_path, "simulate", config="[run]\nn = -1\n") == 2
    assert run(tmp_path, "simulate", config="[constants]\nvdd = -1\n") == 2
    assert run(tmp_path, "simulate", config="[extra]\n") == 2
    assert not (tmp_path / "out" / "observations.csv").exists()


def test_extract_pipeline_within_bounds(tmp_path):
    assert run(tmp_path, "simulate", "--seed", "1", out="sim", config="[run]\nn = 200\n") == 0
    src = str(tmp_path / "sim" / "observations.csv")
    assert run(tmp_path, "extract", "--input", src, out="ext") == 0
    summary = json.loads((tmp_path / "ext" / "summary.json").read_text())
    d1 = summary["D1-rowhammer"]
    assert d1["extracted"] == 200
    # recovered ranges sit inside the calibrated bounds, up to HC quantisation
    assert 4.78e10 * 0.99 <= d1["r_s_ohm"]["min"] <= d1["r_s_ohm"]["max"] <= 3.05e12 * 1.01
    assert len(rows(tmp_path / "ext" / "extraction.csv")) == 200


def test_extract_empty_input(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("cell_id,dimm,mechanism,pattern,flip,hc_flip,t_lo_s,t_hi_s\n")
    assert run(tmp_path, "extract", "--input", str(empty)) == 0
    assert rows(tmp_path / "out" / "extraction.csv") == []


def test_extract_mechanism_mismatch(tmp_path):
    assert run(tmp_path, "simulate", "--mechanism", "rowpress", out="rp",
               config="[run]\nn = 5\n") == 0
    src = str(tmp_path / "rp" / "observations.csv")
    assert run(tmp_path, "extract", "--mechanism", "rowhammer", "--input", src, out="x") == 3
    assert not (tmp_path / "x" / "extraction.csv").exists()


def test_extract_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("cell_id,dimm,mechanism,pattern,flip,t_lo_s,t_hi_s\n")
    assert run(tmp_path, "extract", "--input", str(bad)) == 3
    assert "hc_flip" in capsys.readouterr().err


def test_extract_live_retention(tmp_path):
    cfg = "[run]\nn = 10\nlive = true\nmechanism = \"retention\"\n"
    assert run(tmp_path, "extract", config=cfg) == 0
    out = rows(tmp_path / "out" / "extraction.csv")
    assert len(out) == 10
    for r in out:
        if r["status"] == "ok":
            assert float(r["r_s_noise_ohm"]) <= float(r["r_s_ohm"]) * 1.001


def test_analyze_and_report(tmp_path, capsys):
    cfg = "[run]\nn = 300\nm_010 = 300\nprofile = \"all\"\n"
    assert run(tmp_path, "analyze", config=cfg) == 0
    med = json.loads((tmp_path / "out" / "medians.json").read_text())
    assert len(med) == 14
    for d in ("D1", "D2", "D3", "D4", "D5", "D6", "D7"):
        assert med[f"{d}-rowpress"]["delta_g_rel"] > med[f"{d}-rowhammer"]["delta_g_rel"]
    acc = json.loads((tmp_path / "out" / "accuracy.json").read_text())
    assert all(0.5 <= v["acc"] <= 1 for v in acc.values())
    long = rows(tmp_path / "out" / "plot_long.csv")
    assert set(long[0]) == {"dimm", "mechanism", "pattern", "metric", "value"}
    capsys.readouterr()
    assert run(tmp_path, "report") == 0
    text = capsys.readouterr().out
    assert "median R_S higher under Rowpress: 7/7" in text
    assert (tmp_path / "out" / "report.md").exists()


def test_analyze_single_cell(tmp_path):
    assert run(tmp_path, "analyze", "--mechanism", "rowhammer",
               config="[run]\nn = 1\nmechanisms = [\"rowhammer\"]\n") == 0
    med = json.loads((tmp_path / "out" / "medians.json").read_text())["D1-rowhammer"]
    score = rows(tmp_path / "out" / "scores.csv")[0]
    assert med["r_s"] == float(score["r_s"]) and med["tau_010"] == float(score["tau_010"])


def test_analyze_infeasible(tmp_path):
    cfg = ("[run]\nn = 3\nmechanisms = [\"rowhammer\"]\nprofile = \"custom\"\n"
           "[profile]\nr_s_range = [1e17, 2e17]\nr_b_range = [1e14, 2e14]\n")
    assert run(tmp_path, "analyze", config=cfg) == 4


def test_report_missing_inputs(tmp_path, capsys):
    assert run(tmp_path, "report", "--input", str(tmp_path / "nowhere")) == 3
    err = capsys.readouterr().err
    assert "medians.json" in err and "accuracy.json" in err


def test_json_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"run": {"n": 4, "seed": 3}}))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    assert len(load_observations(tmp_path / "o" / "observations.csv")) == 8


@pytest.mark.parametrize("argv", [["--version"], ["simulate", "--help"]])
def test_help_and_version(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 0
