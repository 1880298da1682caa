"""Problem data for the one-phase Stefan problem with nonlinear boundary flux.

The unknowns are a front position ``s(t)`` and a temperature ``u(t, x)`` on
``[0, s(t)]`` with

    u_t = u_xx,                 0 < x < s(t)
    -u_x(t, 0) = u(t, 0)**p     (or a Dirichlet / Neumann variant)
    u(t, s(t)) = 0,  s'(t) = -u_x(t, s(t))

Initial data are Lipschitz, nonnegative, vanish at ``s0`` and are not
identically zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidSpecError


# ---------------------------------------------------------------------------
# Boundary conditions at x = 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearFlux:
    """-u_x(t, 0) = u(t, 0)**p, with p taken from the problem."""


@dataclass(frozen=True)
class DirichletConstant:
    u0: float

    def __post_init__(self):
        if not np.isfinite(self.u0) or self.u0 < 0:
            raise InvalidSpecError(f"Dirichlet value must be >= 0, got {self.u0}")


@dataclass(frozen=True)
class NeumannZero:
    """Insulated left end, u_x(t, 0) = 0."""


BoundaryMode = Union[NonlinearFlux, DirichletConstant, NeumannZero]


# ---------------------------------------------------------------------------
# Initial profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearProfileSpec:
    """Ramp ``amplitude * (s0 - x)``."""
    amplitude: float


@dataclass(frozen=True)
class SampledProfileSpec:
    """Piecewise-linear profile given by samples on ``[0, s0]``."""
    x: tuple
    values: tuple


ProfileSpec = Union[LinearProfileSpec, SampledProfileSpec]


@dataclass(frozen=True, eq=False)
class InitialProfile:
    """Piecewise-linear initial datum.

    ``monotone_flag`` is computed from the samples; ``lipschitz_bound``
    defaults to the exact slope bound of the interpolant.
    """
    x: np.ndarray
    values: np.ndarray
    lipschitz_bound: float = None
    monotone_flag: bool = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise InvalidSpecError("profile needs matching 1-D sample arrays of length >= 2")
        if np.any(np.diff(x) <= 0):
            raise InvalidSpecError("profile abscissae must be strictly increasing")
        x.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)
        if self.lipschitz_bound is None:
            object.__setattr__(self, "lipschitz_bound", slope_bound(x, values))
        object.__setattr__(self, "monotone_flag", bool(np.all(np.diff(values) <= 0)))

    @property
    def s0(self) -> float:
        return float(self.x[-1])

    def __call__(self, x):
        """Evaluate the interpolant; zero beyond the right endpoint."""
        return np.interp(x, self.x, self.values, right=0.0)

    def l1_norm(self) -> float:
        return float(np.trapezoid(self.values, self.x))

    def linf_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def slope_bound(x, values) -> float:
    return float(np.max(np.abs(np.diff(values) / np.diff(x))))


def make_initial_linear(s0: float, amplitude: float, n: int = 2) -> InitialProfile:
    """Sampled ramp ``amplitude * (s0 - x)`` on ``[0, s0]``.

    The ramp is exactly linear, so two samples already represent it; ``n``
    only controls how many are stored.
    """
    if not (s0 > 0) or not (amplitude > 0):
        raise InvalidSpecError(
            f"linear profile needs s0 > 0 and amplitude > 0, got s0={s0}, amplitude={amplitude}")
    x = np.linspace(0.0, s0, max(int(n), 2))
    values = amplitude * (s0 - x)
    values[-1] = 0.0
    return InitialProfile(x, values, lipschitz_bound=float(amplitude))


def profile_from_spec(spec: ProfileSpec, s0: float) -> InitialProfile:
    if isinstance(spec, LinearProfileSpec):
        return make_initial_linear(s0, spec.amplitude)
    if isinstance(spec, SampledProfileSpec):
        prof = InitialProfile(np.asarray(spec.x, float), np.asarray(spec.values, float))
        if not np.isclose(prof.s0, s0, rtol=1e-12, atol=0.0):
            raise InvalidSpecError(f"sampled profile ends at {prof.s0}, expected s0={s0}")
        return prof
    raise InvalidSpecError(f"unknown profile spec {spec!r}")


def validate_profile(profile: InitialProfile, s0: float, atol: float = 0.0) -> list:
    """List every violated admissibility condition (empty list means ok).

    Violations are returned as short strings, never raised.
    """
    violations = []
    x, v = profile.x, profile.values
    if x[0] != 0.0 or not np.isclose(x[-1], s0, rtol=1e-12, atol=0.0):
        violations.append("domain mismatch")
    if np.any(v < -atol):
        violations.append("negative values")
    if abs(v[-1]) > atol:
        violations.append("endpoint nonzero")
    if np.all(v == 0.0):
        violations.append("identically zero")
    slope = slope_bound(x, v)
    if slope > profile.lipschitz_bound * (1 + 1e-12) + 1e-300:
        violations.append("lipschitz bound exceeded")
    return violations


def scale_profile(profile: InitialProfile, lam: float) -> InitialProfile:
    if not (lam > 0):
        raise InvalidSpecError(f"scale factor must be positive, got {lam}")
    return InitialProfile(profile.x, lam * profile.values,
                          lipschitz_bound=lam * profile.lipschitz_bound)


# ---------------------------------------------------------------------------
# Problem specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    p: float
    s0: float
    profile: ProfileSpec
    lam: float = 1.0
    bc: BoundaryMode = NonlinearFlux()

    def __post_init__(self):
        if not (self.p > 1):
            raise InvalidSpecError(f"p must exceed 1, got {self.p}")
        if not (self.s0 > 0):
            raise InvalidSpecError(f"s0 must be positive, got {self.s0}")
        if not (self.lam >= 0) or not np.isfinite(self.lam):
            raise InvalidSpecError(f"lambda must be >= 0, got {self.lam}")

    def initial_profile(self) -> InitialProfile:
        """The scaled datum ``lam * phi``; requires ``lam > 0``."""
        base = profile_from_spec(self.profile, self.s0)
        problems = validate_profile(base, self.s0)
        if problems:
            raise InvalidSpecError("inadmissible initial profile: " + ", ".join(problems))
        return scale_profile(base, self.lam)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return ProblemSpec(self.p, self.s0, self.profile, lam, self.bc)
