"""JSON run configuration: parsing, validation and the effective-config echo.

A document has the sections ``problem``, ``numerics``, ``classifier`` and
``output``.  Problem keys may also sit at the top level, so the minimal
document is ``{"p": 3, "s0": 1, "profile": "linear(1)", "lambda": 0.5}``.
"""
from __future__ import annotations

import json
import re
import typing
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .classifier import ClassifierRules
from .errors import ConfigError, InvalidSpecError
from .model import (DirichletConstant, LinearProfileSpec, NeumannZero, NonlinearFlux,
                    ProblemSpec, SampledProfileSpec)
from .solver import Numerics

PROBLEM_KEYS = ("p", "s0", "lambda", "profile", "bc")
SECTIONS = ("problem", "numerics", "classifier", "output", "sweep", "bisect", "convergence")


@dataclass(frozen=True)
class OutputPaths:
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    checkpoint_dir: Optional[str] = None

    def under(self, out_dir) -> "OutputPaths":
        """Fill unset paths with the standard names inside ``out_dir``."""
        d = Path(out_dir)
        return OutputPaths(self.csv_path or str(d / "trajectory.csv"),
                           self.json_path or str(d / "summary.json"),
                           self.checkpoint_dir or str(d / "checkpoints"))


@dataclass(frozen=True)
class SweepConfig:
    lambdas: tuple = ()


@dataclass(frozen=True)
class BisectConfig:
    lam_lo: float = 0.05
    lam_hi: float = 2.0
    tol: float = 1e-2


@dataclass(frozen=True)
class ConvergenceConfig:
    levels: int = 3


@dataclass(frozen=True)
class RunConfig:
    spec: ProblemSpec
    numerics: Numerics = Numerics()
    rules: ClassifierRules = ClassifierRules()
    output: OutputPaths = OutputPaths()
    sweep: SweepConfig = SweepConfig()
    bisect: BisectConfig = BisectConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()

    def to_dict(self) -> dict:
        """Full effective configuration, defaults included; parses back to ``self``."""
        return {
            "problem": {"p": self.spec.p, "s0": self.spec.s0, "lambda": self.spec.lam,
                        "profile": _profile_to_dict(self.spec.profile), "bc": _bc_to_dict(self.spec.bc)},
            "numerics": asdict(self.numerics),
            "classifier": asdict(self.rules),
            "output": asdict(self.output),
            "sweep": asdict(self.sweep),
            "bisect": asdict(self.bisect),
            "convergence": asdict(self.convergence),
        }


# ---------------------------------------------------------------------------
# Typed section parsing
# ---------------------------------------------------------------------------

def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if tp is tuple:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        return tuple(_coerce(v, float, f"{path}[{i}]") for i, v in enumerate(value))
    raise ConfigError(path, f"unsupported type {tp}")


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(name, "expected a table of keys")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    for key in data:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    kwargs = {k: _coerce(v, hints[k], f"{name}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (InvalidSpecError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


_LINEAR = re.compile(r"^\s*linear\s*\(\s*([^)]+)\s*\)\s*$")


def _profile(value, path):
    if isinstance(value, str):
        m = _LINEAR.match(value)
        if not m:
            raise ConfigError(path, f"unrecognized profile {value!r} (expected 'linear(A)')")
        try:
            return LinearProfileSpec(float(m.group(1)))
        except ValueError:
            raise ConfigError(path, f"bad amplitude in {value!r}") from None
    if isinstance(value, dict):
        kind = value.get("kind")
        if kind == "linear":
            _only(value, ("kind", "amplitude"), path)
            if "amplitude" not in value:
                raise ConfigError(f"{path}.amplitude", "missing required key")
            return LinearProfileSpec(_coerce(value["amplitude"], float, f"{path}.amplitude"))
        if kind == "sampled":
            _only(value, ("kind", "x", "values"), path)
            for k in ("x", "values"):
                if k not in value:
                    raise ConfigError(f"{path}.{k}", "missing required key")
            return SampledProfileSpec(_coerce(value["x"], tuple, f"{path}.x"),
                                      _coerce(value["values"], tuple, f"{path}.values"))
        raise ConfigError(f"{path}.kind", f"expected 'linear' or 'sampled', got {kind!r}")
    raise ConfigError(path, f"expected 'linear(A)' or a table, got {value!r}")


def _only(d, allowed, path):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", "unknown key")


def _bc(value, path):
    if value is None:
        return NonlinearFlux()
    kind = value if isinstance(value, str) else (value.get("kind") if isinstance(value, dict) else None)
    if kind == "flux":
        if isinstance(value, dict):
            _only(value, ("kind",), path)
        return NonlinearFlux()
    if kind == "neumann":
        if isinstance(value, dict):
            _only(value, ("kind",), path)
        return NeumannZero()
    if kind == "dirichlet":
        if not isinstance(value, dict) or "u0" not in value:
            raise ConfigError(f"{path}.u0", "missing required key")
        _only(value, ("kind", "u0"), path)
        try:
            return DirichletConstant(_coerce(value["u0"], float, f"{path}.u0"))
        except InvalidSpecError as exc:
            raise ConfigError(f"{path}.u0", str(exc)) from None
    raise ConfigError(path, f"expected 'flux', 'neumann' or {{kind: dirichlet, u0: ...}}, got {value!r}")


def _profile_to_dict(profile):
    if isinstance(profile, LinearProfileSpec):
        return {"kind": "linear", "amplitude": profile.amplitude}
    return {"kind": "sampled", "x": list(profile.x), "values": list(profile.values)}


def _bc_to_dict(bc):
    if isinstance(bc, DirichletConstant):
        return {"kind": "dirichlet", "u0": bc.u0}
    return {"kind": "neumann" if isinstance(bc, NeumannZero) else "flux"}


def parse_config(document) -> RunConfig:
    """Validate a configuration given as a dict or JSON text; fill defaults."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"malformed JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ConfigError("<document>", "top level must be a table")
    doc = dict(document)
    problem = doc.pop("problem", None)
    flat = {k: doc.pop(k) for k in PROBLEM_KEYS if k in doc}
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(key, "unknown key")
    if problem is not None and flat:
        raise ConfigError(next(iter(flat)), "problem keys given both at top level and in 'problem'")
    prefix = "problem." if problem is not None else ""
    problem = problem if problem is not None else flat
    if not isinstance(problem, dict):
        raise ConfigError("problem", "expected a table of keys")
    _only(problem, PROBLEM_KEYS, "problem")
    for k in ("p", "s0", "profile"):
        if k not in problem:
            raise ConfigError(prefix + k, "missing required key")
    p = _coerce(problem["p"], float, prefix + "p")
    s0 = _coerce(problem["s0"], float, prefix + "s0")
    lam = _coerce(problem.get("lambda", 1.0), float, prefix + "lambda")
    prof = _profile(problem["profile"], prefix + "profile")
    bc = _bc(problem.get("bc"), prefix + "bc")
    if not p > 1:
        raise ConfigError(prefix + "p", "p must exceed 1")
    try:
        spec = ProblemSpec(p, s0, prof, lam, bc)
        if lam > 0:
            spec.initial_profile()
    except InvalidSpecError as exc:
        raise ConfigError(prefix.rstrip(".") or "problem", str(exc)) from None
    num = _section(Numerics, doc.get("numerics"), "numerics")
    try:
        num.resolved(s0)
    except InvalidSpecError as exc:
        raise ConfigError("numerics", str(exc)) from None
    return RunConfig(
        spec=spec,
        numerics=num,
        rules=_section(ClassifierRules, doc.get("classifier"), "classifier"),
        output=_section(OutputPaths, doc.get("output"), "output"),
        sweep=_section(SweepConfig, doc.get("sweep"), "sweep"),
        bisect=_section(BisectConfig, doc.get("bisect"), "bisect"),
        convergence=_section(ConvergenceConfig, doc.get("convergence"), "convergence"),
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    return parse_config(text)
