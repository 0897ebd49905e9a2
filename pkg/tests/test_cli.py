import json
import math
import os
import shutil

import numpy as np
import pytest

from barrierbilevel import io
from barrierbilevel.cli import EXIT_CONFIG, EXIT_OK, EXIT_UNCERTIFIED, main
from barrierbilevel.config import config_from_dict, load_config, parse_seeds
from barrierbilevel.errors import InvalidConfig

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _cfg(name):
    return os.path.join(CONFIGS, name)


def _small_custom(tmp_path, **over):
    doc = json.load(open(_cfg("quadratic5d.json")))
    doc["instance"]["polytope"] = os.path.abspath(_cfg("polytope5d.json"))
    doc["K"] = 30
    doc["diagnostics"] = {"tube": True, "stationarity": True}
    doc.update(over)
    path = tmp_path / "small.json"
    path.write_text(json.dumps(doc))
    return str(path)


# --------------------------------------------------------------------------
# config and io
# --------------------------------------------------------------------------

def test_shipped_configs_load():
    for name in os.listdir(CONFIGS):
        if name.startswith("polytope"):
            continue
        cfg = load_config(_cfg(name))
        assert cfg.experiment in ("hexagon", "toll", "custom")


@pytest.mark.parametrize("doc", [
    [], {"experiment": "hexagon"}, {"experiment": "nope", "K": 1}, {"experiment": "hexagon", "K": -1},
    {"experiment": "hexagon", "K": 1, "extra": 1}, {"experiment": "hexagon", "K": 1, "seeds": []},
    {"experiment": "hexagon", "K": 1, "diagnostics": {"magic": True}},
])
def test_config_validation(doc):
    with pytest.raises(InvalidConfig):
        config_from_dict(doc)


def test_parse_seeds():
    assert parse_seeds("0,1, 5") == [0, 1, 5]
    with pytest.raises(InvalidConfig):
        parse_seeds("a,b")
    with pytest.raises(InvalidConfig):
        parse_seeds(",")


def test_csv_roundtrip_keeps_floats(tmp_path):
    p = io.write_csv(str(tmp_path / "t.csv"), ("a", "b"), [(0.1, float("nan")), (1 / 3, 2)])
    header, rows = io.read_csv(p)
    assert header == ["a", "b"]
    assert float(rows[1][0]) == 1 / 3 and rows[0][1] == ""


def test_json_writer_maps_nonfinite_to_null(tmp_path):
    p = io.write_json(str(tmp_path / "x.json"), {"a": float("inf"), "b": np.arange(2)})
    assert json.load(open(p)) == {"a": None, "b": [0, 1]}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def test_missing_config_exit_one(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err
    assert main(["certify"]) == EXIT_CONFIG


def test_malformed_config_exit_one(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["run", "--config", str(p)]) == EXIT_CONFIG


def test_certify_exit_codes(capsys):
    assert main(["certify", "--config", _cfg("s1_violation.json")]) == EXIT_UNCERTIFIED
    out = capsys.readouterr().out
    assert "(S1)" in out and "FAIL" in out
    assert main(["certify", "--config", _cfg("hexagon.json")]) == EXIT_OK
    assert main(["certify", "--config", _cfg("toll_certified.json")]) == EXIT_OK
    assert main(["certify", "--config", _cfg("toll.json")]) == EXIT_UNCERTIFIED


def test_certify_writes_report(tmp_path):
    assert main(["certify", "--config", _cfg("hexagon.json"), "--out", str(tmp_path)]) == EXIT_OK
    header, rows = io.read_csv(str(tmp_path / "certify.csv"))
    assert header == list(io.CERTIFY_COLUMNS) and len(rows) == 7
    assert json.load(open(tmp_path / "certify.json"))["passed"] is True


def test_run_is_byte_identical(tmp_path):
    cfg = _small_custom(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", str(b)]) == EXIT_OK
    for name in ("trace.csv", "trace.json", "tube_report.csv", "stationarity.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "tube_report.png").exists()
    assert len(io.read_csv(str(a / "trace.csv"))[1]) == 31


def test_run_multiple_seeds_and_diagnose(tmp_path, capsys):
    cfg = _small_custom(tmp_path, noise={"radius_x": 0.1, "radius_y": 0.1})
    out = tmp_path / "multi"
    assert main(["run", "--config", cfg, "--out", str(out), "--seeds", "3,4"]) == EXIT_OK
    t3 = (out / "seed_3" / "trace.csv").read_bytes()
    assert t3 != (out / "seed_4" / "trace.csv").read_bytes()
    diag_out = tmp_path / "diag"
    assert main(["diagnose", "--config", cfg, "--trace", str(out / "seed_3" / "trace.json"),
                 "--out", str(diag_out)]) == EXIT_OK
    assert (diag_out / "tube_report.csv").exists()
    assert main(["diagnose", "--config", cfg, "--trace", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_run_hexagon_writes_full_grid(tmp_path):
    out = tmp_path / "hex"
    assert main(["run", "--config", _cfg("hexagon.json"), "--out", str(out)]) == EXIT_OK
    _, rows = io.read_csv(str(out / "hexagon.csv"))
    assert len(rows) == 2001  # warm start plus 2000 grid points
    assert len(io.read_csv(str(out / "trace.csv"))[1]) == 2001
    summary = json.load(open(out / "summary.json"))
    assert summary["barrier_first_exit_index"] is None
    assert summary["euclidean_first_exit_index"] is not None
    assert (out / "hexagon.png").stat().st_size > 0


def test_bench_toll_zero_budget_is_censored(tmp_path):
    doc = {"experiment": "toll", "instance": {"n": 10, "tau": 0.2, "mu": 1e-3}, "K": 3,
           "schedule": {"kind": "deterministic_polynomial", "alpha0": 4.455e-05, "gamma0": 0.004455,
                        "lambda0": 100.0, "k0": 1.0, "xi": 1000.0, "T": 3, "eta": 0.25},
           "bench": {"n_list": [10], "reference_iterations_factor": 1}}
    p = tmp_path / "bench.json"
    p.write_text(json.dumps(doc))
    out = tmp_path / "bench"
    assert main(["bench-toll", "--config", str(p), "--out", str(out), "--budget-ms", "0",
                 "--seeds", "0,1", "--parallel", "2"]) == EXIT_OK
    header, rows = io.read_csv(str(out / "results.csv"))
    assert header == list(io.BENCH_COLUMNS)
    assert [r[header.index("status")] for r in rows] == ["budget-censored", "budget-censored"]
    gap = float(rows[0][header.index("final_normalized_gap")])
    assert math.isfinite(gap)
    assert (out / "reference_pool.csv").exists() and (out / "toll_bench.png").exists()
    assert (out / "cells" / "n10_seed1" / "instance.json").exists()


def test_negative_budget_rejected(tmp_path):
    assert main(["run", "--config", _small_custom(tmp_path), "--budget-ms", "-5"]) == EXIT_CONFIG


def test_relative_polytope_path(tmp_path):
    shutil.copy(_cfg("polytope5d.json"), tmp_path / "polytope5d.json")
    doc = json.load(open(_cfg("quadratic5d.json")))
    doc["K"] = 2
    (tmp_path / "c.json").write_text(json.dumps(doc))
    assert load_config(str(tmp_path / "c.json")).instance["polytope"] == "polytope5d.json"
    assert main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == EXIT_OK
