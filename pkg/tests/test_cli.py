import json
import os
import subprocess
import sys

import pytest

from stefanlab.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_FAILURE, EXIT_IO, EXIT_OK, main


def write_cfg(tmp_path, **extra):
    doc = {"p": 3, "s0": 1, "profile": "linear(1)", "lambda": 0.5,
           "numerics": {"N": 64, "t_end": 1.0}}
    for k, v in extra.items():
        if k == "numerics":
            doc["numerics"].update(v)
        else:
            doc[k] = v
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_simulate_decay(tmp_path):
    cfg = write_cfg(tmp_path, numerics={"checkpoint_times": [0.5, 1.0]})
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ReachedHorizon"
    assert summary["config"]["problem"]["lambda"] == 0.5
    assert (out / "trajectory.csv").read_text().startswith("t,s,sdot,u0")
    assert (out / "checkpoints" / "checkpoint_00001.csv").exists()


def test_simulate_blowup(tmp_path):
    cfg = write_cfg(tmp_path, **{"lambda": 2.0})
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_BLOWUP
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "BlowUpDetected"
    assert 0.003 < summary["blowup_time_estimate"] < 0.005


def test_simulate_unwritable(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["simulate", "--config", write_cfg(tmp_path), "--out", str(blocker / "x")]) == EXIT_IO


def test_config_errors(tmp_path, capsys):
    assert main(["simulate", "--config", write_cfg(tmp_path, p=1), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "p must exceed 1" in capsys.readouterr().err
    assert main(["simulate", "--config", write_cfg(tmp_path, foo=1), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "foo" in capsys.readouterr().err
    assert main(["simulate", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["simulate", "--config", write_cfg(tmp_path), "--jobs", "0"]) == EXIT_CONFIG


def test_sweep(tmp_path):
    cfg = write_cfg(tmp_path, numerics={"t_end": 50.0})
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--lambdas", "0.01"]) == EXIT_OK
    runs = json.loads((out / "sweep.json").read_text())["runs"]
    assert [r["verdict"] for r in runs] == ["ExponentialDecay"]
    assert main(["sweep", "--config", cfg, "--out", str(out), "--lambdas", "2", "4"]) == EXIT_OK
    report = json.loads((out / "sweep.json").read_text())
    assert [r["verdict"] for r in report["runs"]] == ["BlowUp", "BlowUp"]
    assert report["monotonicity_audit"]["single_flip"]
    assert main(["sweep", "--config", cfg, "--out", str(out), "--lambdas"]) == EXIT_CONFIG


def test_bisect_bad_bracket(tmp_path):
    cfg = write_cfg(tmp_path, numerics={"t_end": 5.0})
    assert main(["bisect", "--config", cfg, "--out", str(tmp_path / "b"),
                 "--lo", "2", "--hi", "3", "--tol", "0.1"]) == EXIT_CONFIG


def test_bisect_small_run(tmp_path):
    cfg = write_cfg(tmp_path, numerics={"t_end": 50.0})
    out = tmp_path / "b"
    assert main(["bisect", "--config", cfg, "--out", str(out), "--lo", "0.5", "--hi", "2",
                 "--tol", "0.2"]) == EXIT_OK
    res = json.loads((out / "bisect.json").read_text())
    lo, hi = res["bracket"]
    assert hi - lo <= 0.2 and lo < 0.99 < hi


def test_convergence_levels(tmp_path):
    assert main(["convergence", "--out", str(tmp_path / "c"), "--levels", "2"]) == EXIT_CONFIG
    assert main(["convergence", "--out", str(tmp_path / "c"), "--levels", "3"]) == EXIT_OK
    lines = (tmp_path / "c" / "convergence.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 3


def test_verify_default_like_passes(tmp_path, capsys):
    cfg = write_cfg(tmp_path, numerics={"N": 200, "t_end": 2.0})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_verify_coarse_fails(tmp_path, capsys):
    cfg = write_cfg(tmp_path, **{"lambda": 0.9},
                    numerics={"N": 16, "dt_max": 0.5, "c_bu": 10.0, "growth": 2.0, "t_end": 5.0})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == EXIT_FAILURE
    assert "FAIL mass_balance" in capsys.readouterr().out
    checks = json.loads((tmp_path / "v" / "verify.json").read_text())["checks"]
    assert not next(c for c in checks if c["check"] == "mass_balance")["pass"]


def test_dirichlet_verify_and_selfsimilar(tmp_path, capsys):
    cfg = write_cfg(tmp_path, s0=0.1, bc={"kind": "dirichlet", "u0": 1.0},
                    numerics={"N": 100, "t_end": 0.2})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == EXIT_OK
    checks = json.loads((tmp_path / "v" / "verify.json").read_text())["checks"]
    sim = next(c for c in checks if c["check"] == "similarity")
    assert sim["pass"] and sim["measured"] is not None
    assert main(["selfsimilar", "--config", cfg, "--out", str(tmp_path / "s")]) == EXIT_OK
    res = json.loads((tmp_path / "s" / "selfsimilar.json").read_text())
    assert res["A"] == pytest.approx(1.2401252666, abs=1e-9)
    assert res["relative_error_final"] <= 1e-2


def test_selfsimilar_needs_value(tmp_path):
    assert main(["selfsimilar", "--config", write_cfg(tmp_path), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["selfsimilar", "--u0", "5e-3", "--out", str(tmp_path)]) == EXIT_OK


def test_module_entry_point_logging_and_seed_free(tmp_path):
    cfg = write_cfg(tmp_path, numerics={"t_end": 0.1})
    env = {**os.environ, "STEFANLAB_LOG": "info"}
    proc = subprocess.run([sys.executable, "-m", "stefanlab", "simulate", "--config", cfg,
                           "--out", str(tmp_path / "o"), "--seed-free"],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == EXIT_OK
    assert "INFO stefanlab" in proc.stderr
