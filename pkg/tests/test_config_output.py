import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stefanlab.config import parse_config, load_config
from stefanlab.diagnostics import Checkpoint, DiagnosticsRecord, Trajectory, RECORD_FIELDS
from stefanlab.errors import ConfigError
from stefanlab.model import DirichletConstant, LinearProfileSpec, NeumannZero, NonlinearFlux
from stefanlab.output import (HEADER, ensure_writable, fmt, read_checkpoints, read_records_csv,
                              write_checkpoints, write_json, write_records_csv)
from stefanlab.solver import Numerics

MINIMAL = {"p": 3, "s0": 1, "profile": "linear(1)", "lambda": 0.5}


def test_minimal_document_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.spec.p == 3.0 and cfg.spec.lam == 0.5
    assert cfg.spec.profile == LinearProfileSpec(1.0)
    assert isinstance(cfg.spec.bc, NonlinearFlux)
    assert cfg.numerics == Numerics()
    assert cfg.bisect.lam_lo == 0.05 and cfg.convergence.levels == 3


def test_effective_config_round_trips():
    doc = {"problem": {"p": 2.5, "s0": 2, "lambda": 1.5,
                       "profile": {"kind": "sampled", "x": [0, 1, 2], "values": [1, 0.5, 0]},
                       "bc": {"kind": "dirichlet", "u0": 0.3}},
           "numerics": {"N": 64, "t_end": 3.0, "checkpoint_times": [1, 2]},
           "classifier": {"min_records": 10},
           "sweep": {"lambdas": [0.1, 0.2]}}
    cfg = parse_config(doc)
    assert cfg.spec.bc == DirichletConstant(0.3)
    assert cfg.numerics.checkpoint_times == (1.0, 2.0)
    echoed = json.loads(json.dumps(cfg.to_dict()))
    assert parse_config(echoed) == cfg


def test_json_text_and_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**MINIMAL, "bc": "neumann"}))
    assert isinstance(load_config(path).spec.bc, NeumannZero)
    with pytest.raises(ConfigError) as exc:
        load_config(tmp_path / "missing.json")
    assert "cannot read" in str(exc.value)
    with pytest.raises(ConfigError):
        parse_config("{not json")


@pytest.mark.parametrize("doc, path", [
    ({**MINIMAL, "p": 1}, "p"),
    ({**MINIMAL, "foo": 1}, "foo"),
    ({**MINIMAL, "numerics": {"N": "big"}}, "numerics.N"),
    ({**MINIMAL, "numerics": {"dt_maxx": 1}}, "numerics.dt_maxx"),
    ({**MINIMAL, "numerics": {"grading": 1}}, "numerics.grading"),
    ({**MINIMAL, "numerics": {"N": 8}}, "numerics"),
    ({**MINIMAL, "profile": "cubic(1)"}, "profile"),
    ({**MINIMAL, "profile": {"kind": "linear"}}, "profile.amplitude"),
    ({**MINIMAL, "bc": {"kind": "dirichlet"}}, "bc.u0"),
    ({"problem": {"p": 3, "s0": 1}}, "problem.profile"),
    ({"problem": MINIMAL, "p": 3}, "p"),
    ({**MINIMAL, "sweep": {"lambdas": "0.1"}}, "sweep.lambdas"),
])
def test_errors_name_the_key(doc, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == path


def test_p_message():
    with pytest.raises(ConfigError, match="p must exceed 1"):
        parse_config({**MINIMAL, "p": 0.5})


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(finite, finite, finite, st.integers(0, 100)), min_size=1, max_size=20))
def test_records_csv_is_lossless(tmp_path_factory, rows):
    traj = Trajectory(spec=None)
    for i, (a, b, c, n) in enumerate(rows):
        traj.append(DiagnosticsRecord(float(i), a, b, c, a, b, c, a, n))
    path = tmp_path_factory.mktemp("csv") / "r.csv"
    write_records_csv(traj, path)
    assert path.read_text().splitlines()[0] == HEADER == ",".join(RECORD_FIELDS)
    back = read_records_csv(path)
    assert [r.as_tuple() for r in back.records] == [r.as_tuple() for r in traj.records]


@given(finite)
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_checkpoints_round_trip(tmp_path):
    traj = Trajectory(spec=None)
    x = np.linspace(0.0, 1.3, 7)
    traj.checkpoints = [Checkpoint(0.1 * (k + 1), 1.3, x, np.exp(-k - x) / 3, k) for k in range(3)]
    names = write_checkpoints(traj, tmp_path / "cp")
    assert names == ["checkpoint_00000.csv", "checkpoint_00001.csv", "checkpoint_00002.csv"]
    back = read_checkpoints(tmp_path / "cp")
    for a, b in zip(traj.checkpoints, back):
        assert (a.t, a.s, a.index) == (b.t, b.s, b.index)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.u, b.u)


def test_json_non_finite_values(tmp_path):
    path = tmp_path / "s.json"
    write_json({"a": math.inf, "b": [np.float64(math.nan), np.int64(3), (1.5, np.bool_(True))]}, path)
    assert json.loads(path.read_text()) == {"a": "inf", "b": ["nan", 3, [1.5, True]]}
    assert not (tmp_path / "s.json.tmp").exists()


def test_ensure_writable(tmp_path):
    ensure_writable(tmp_path / "new" / "f.csv")
    assert not (tmp_path / "new" / "f.csv").exists()
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        ensure_writable(blocker / "f.csv")
