import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from spinqst import ChainSpec, Model, build_hamiltonian
from spinqst.cli import main
from spinqst.config import ConfigError, eval_time, parse_config

CHAIN = {"model": "short_range", "n": 6, "couplings": [0.6, 1.1, 1.3, 1.1, 0.6]}
OPT = {"population": 16, "max_iterations": 60, "stall_window": 20}


def _run(tmp_path, cfg, verb=None, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2) if isinstance(cfg, dict) else cfg)
    out = tmp_path / "out"
    code = main([verb or cfg["task"], "--config", str(path), "--out", str(out), *extra])
    return code, out


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_build(tmp_path):
    code, out = _run(tmp_path, {"task": "build", "chain": CHAIN})
    assert code == 0
    h = np.loadtxt(out / "hamiltonian.csv", delimiter=",")
    spec = ChainSpec.from_json((out / "chain.json").read_text())
    np.testing.assert_array_equal(h, build_hamiltonian(spec).matrix)
    assert spec.couplings == tuple(CHAIN["couplings"])


def test_build_from_chain_file(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(CHAIN))
    code, out = _run(tmp_path, {"task": "build", "chain": "c.json"})
    assert code == 0


def test_evolve(tmp_path):
    cfg = {"task": "evolve", "chain": CHAIN, "arrival_time": "N",
           "grid": {"t_max": "2*T", "points": 11, "observables": ["population", "ipr", "sites"],
                    "scaled_time": "T"}}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    rows = _rows(out / "series.csv")
    assert len(rows) == 11
    assert list(rows[0])[:4] == ["t", "t_over_T", "population", "ipr"]
    assert float(rows[-1]["t_over_T"]) == pytest.approx(2.0)
    assert float(rows[0]["site_1"]) == pytest.approx(1.0, abs=1e-14)


def test_spectrum(tmp_path):
    code, out = _run(tmp_path, {"task": "spectrum", "chain": CHAIN, "arrival_time": 6})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["arrival_time"] == 6.0
    assert 0 <= rep["P_T"] <= 1
    assert len(_rows(out / "ladder.csv")) == 5
    assert sum(float(r["weight"]) for r in _rows(out / "profile.csv")) == pytest.approx(1.0)
    assert len(_rows(out / "energies.csv")) == 6


def test_optimize_is_reproducible(tmp_path):
    cfg = {"task": "optimize", "parameterization": {"model": "long_range", "n": 6},
           "arrival_time": "2*N", "rng_seed": 4, "optimizer": OPT}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    shutil.rmtree(out)
    code, out = _run(tmp_path, cfg)
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first
    res = json.loads(first["result.json"])
    spec = ChainSpec.from_json(first["best_chain.json"].decode())
    assert spec.model is Model.LONG_RANGE and spec.centro_symmetric
    assert float(_rows(out / "trace.csv")[-1]["best_cost"]) == res["best_P"]


def test_seed_override_changes_result(tmp_path):
    cfg = {"task": "optimize", "parameterization": {"model": "short_range", "n": 8},
           "arrival_time": "N", "rng_seed": 4, "optimizer": OPT}
    _, out = _run(tmp_path, cfg)
    a = json.loads((out / "result.json").read_text())
    _, out = _run(tmp_path, cfg, None, "--seed", "5")
    b = json.loads((out / "result.json").read_text())
    assert b["optimizer"]["rng_seed"] == 5
    assert a["best_params"] != b["best_params"]


def test_schedule(tmp_path):
    cfg = {"task": "schedule", "parameterization": {"model": "short_range", "n": 6},
           "arrival_time": "N", "rng_seed": 1, "optimizer": OPT, "schedule": {"runs": 3}}
    code, out = _run(tmp_path, cfg, None, "--threads", "2")
    assert code == 0
    runs = _rows(out / "runs.csv")
    assert [int(r["run"]) for r in runs] == [1, 2, 3]
    ps = [float(r["best_P"]) for r in runs]
    assert ps == sorted(ps)
    res = json.loads((out / "result.json").read_text())
    assert res["schedule"]["runs"] == 3 and len(res["runs"]) == 3


def test_sweep(tmp_path):
    cfg = {"task": "sweep", "arrival_time": "2*N", "rng_seed": 2, "optimizer": OPT,
           "schedule": {"runs": 2},
           "sweep": {"models": ["short_range", "long_range"], "lengths": [4, 5],
                     "opt_counts": [1, 2, "all"]}}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 2 * 2 * 3
    assert all(r["status"] == "ok" and r["seed"] == "2" for r in rows)
    for r in rows:
        assert (out / "chains" / f"{r['model']}_N{r['N']}_m{r['m']}.json").exists()
        assert float(r["T"]) == 2 * int(r["N"])


def test_snapshots(tmp_path):
    cfg = {"task": "snapshots", "parameterization": {"model": "short_range", "n": 6},
           "arrival_time": "N", "rng_seed": 3, "optimizer": OPT,
           "snapshots": {"thresholds": [0.2, 0.5, 0.9999999999]}}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    rows = _rows(out / "snapshots.csv")
    assert [r["k"] for r in rows] == ["1", "2", "3"]
    for r in rows:
        if r["reached"] == "1":
            assert float(r["P"]) >= float(r["threshold"])
            assert (out / f"snapshot_{r['k']}.json").exists()
        else:
            assert r["P"] == ""


@pytest.mark.parametrize("cfg,fragment", [
    ({"task": "optimize", "parameterization": {"model": "short_range", "n": 6},
      "arrival_time": 6}, "rng_seed"),
    ({"task": "build", "chain": {**CHAIN, "couplings": [1, 1, 1, 1]}}, "expected 5 couplings"),
    ({"task": "build", "chain": CHAIN, "colour": "red"}, "unknown"),
    ({"task": "evolve", "chain": CHAIN}, "grid"),
    ({"task": "spectrum", "chain": CHAIN, "arrival_time": "3*M"}, "time"),
    ({"task": "spectrum", "chain": {**CHAIN, "model": "long_range"}, "arrival_time": 1}, ""),
])
def test_config_errors_exit_2(tmp_path, capsys, cfg, fragment):
    code, _ = _run(tmp_path, cfg)
    assert code == 2
    assert fragment in capsys.readouterr().err


def test_verb_must_match_task(tmp_path):
    code, _ = _run(tmp_path, {"task": "build", "chain": CHAIN}, "spectrum")
    assert code == 2


def test_missing_config_file(tmp_path):
    assert main(["build", "--config", str(tmp_path / "nope.json")]) == 2


def test_errors_name_the_line(tmp_path, capsys):
    text = '{\n  "task": "build",\n  "chain": {"model": "short_range", "n": 1,\n "couplings": []}\n}\n'
    code, _ = _run(tmp_path, text, "build")
    assert code == 2
    assert "cfg.json:3:" in capsys.readouterr().err
    code, _ = _run(tmp_path, '{\n  "task": "build",\n  "chain": ,\n}', "build")
    assert code == 2
    assert "cfg.json:3:" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    chain = {"model": "short_range", "n": 4, "couplings": [1e308, 1e308, 1e308]}
    code, _ = _run(tmp_path, {"task": "spectrum", "chain": chain, "arrival_time": 1})
    assert code == 3
    assert "numerical" in capsys.readouterr().err


def test_parse_config_line_numbers():
    with pytest.raises(ConfigError) as info:
        parse_config('{"task": "build",\n"chain": {"model": "short_range", "n": 3, "couplings": [1, -1]}}')
    assert info.value.line == 2


def test_eval_time():
    assert eval_time("N", 7) == 7
    assert eval_time("2.5*N", 4) == 10
    assert eval_time("0.5*T", 4, 8.0) == 4
    assert eval_time(3, 4) == 3.0
    with pytest.raises(ValueError):
        eval_time("T", 4)
    with pytest.raises(ValueError):
        eval_time(-1, 4)


def test_console_script(tmp_path):
    exe = shutil.which("qst")
    cmd = [exe] if exe else [sys.executable, "-m", "spinqst.cli"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "build", "chain": CHAIN}))
    proc = subprocess.run(cmd + ["build", "--config", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "chain.json").exists()


def test_single_cell_sweep_matches_optimize(tmp_path):
    opt = {"task": "optimize", "parameterization": {"model": "long_range", "n": 7, "opt_count": 2},
           "arrival_time": "2*N", "rng_seed": 11, "optimizer": OPT}
    _, out = _run(tmp_path, opt, name="opt.json")
    best = json.loads((out / "result.json").read_text())["best_P"]
    sweep = {"task": "sweep", "arrival_time": "2*N", "rng_seed": 11, "optimizer": OPT,
             "sweep": {"models": ["long_range"], "lengths": [7], "opt_counts": [2]}}
    _, out = _run(tmp_path, sweep, name="sweep.json")
    (row,) = _rows(out / "sweep.csv")
    assert float(row["best_P"]) == best
