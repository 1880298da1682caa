"""Implicit finite-volume solver on the boundary-immobilized domain.

With ``y = x / s(t)`` and ``v(t, y) = u(t, y s(t))`` the heat equation becomes

    (s v)_t = d/dy ( v_y / s + s' y v ),      0 < y < 1,

with ``v(t, 1) = 0`` and ``s' = -v_y(t, 1) / s``.  Node ``j`` owns the control
volume between its neighbouring cell midpoints.  Fluxes through interior
faces are differenced; the flux through ``y = 0`` is the boundary condition
itself and ``s'`` is the flux through the last face.  Heat is therefore
conserved exactly by the semi-discrete scheme.

Each step is a theta-scheme in time.  The interior rows form a tridiagonal
system; the left value ``v_0`` is eliminated as a border unknown so the
nonlinear flux condition reduces to one scalar equation, solved by
safeguarded Newton.  The front is coupled either by Picard sweeps or by a
bordered Newton iteration on ``(v, s, s')``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from .diagnostics import (
    BLOWUP_DETECTED, DECAY_CERTIFIED, NUMERICAL_FAILURE, REACHED_HORIZON,
    Checkpoint, DiagnosticsRecord, Trajectory, certificate_threshold, energy,
)
from .errors import CorruptedStateError, InvalidSpecError, StepFailure
from .grid import Grid, make_nodes
from .model import DirichletConstant, NeumannZero, NonlinearFlux, ProblemSpec

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# Options and state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Picard:
    max_sweeps: int = 25
    tol: float = 1e-10


@dataclass(frozen=True)
class MonolithicNewton:
    max_iters: int = 30
    tol: float = 1e-10


FrontMotion = Union[str, Callable[[float], tuple]]


@dataclass(frozen=True)
class StepOptions:
    """Per-step solver options.

    ``front`` is ``"stefan"`` (the free boundary), ``"frozen"`` (s fixed,
    used by manufactured-solution tests) or a callable ``t -> (s, s')``
    prescribing the motion.  ``mms_source(t, x)`` is added to the heat
    equation and ``mms_flux(t)`` to the left boundary relation.
    """
    newton_tol: float = 1e-12
    newton_max_iters: int = 50
    theta: float = 1.0
    advection: str = "hybrid"
    coupling: Union[Picard, MonolithicNewton] = Picard()
    front: FrontMotion = "stefan"
    mms_source: Optional[Callable] = None
    mms_flux: Optional[Callable] = None
    sdot_tol: float = 1e-9

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise InvalidSpecError("newton_tol must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise InvalidSpecError("theta must lie in [0.5, 1]")
        if self.advection not in ("hybrid", "upwind", "centered"):
            raise InvalidSpecError(f"unknown advection mode {self.advection!r}")
        if not isinstance(self.coupling, (Picard, MonolithicNewton)):
            raise InvalidSpecError(f"unknown front coupling {self.coupling!r}")
        if not (callable(self.front) or self.front in ("stefan", "frozen")):
            raise InvalidSpecError(f"unknown front motion {self.front!r}")


@dataclass
class SolverState:
    t: float
    s: float
    v: np.ndarray
    sdot: float
    grid: Grid
    dt_next: float
    dt_last: float = 0.0
    step_count: int = 0
    newton_iters_last: int = 0
    front_clamped: bool = False

    @property
    def u0(self) -> float:
        return float(self.v[0])

    @property
    def x(self) -> np.ndarray:
        return self.grid.y * self.s


def transform_pde_coefficients(state: SolverState):
    """Diffusion ``1/s^2`` and advection ``y s'/s`` of the immobilized equation."""
    s = state.s
    if not (s > 0) or not math.isfinite(s):
        raise CorruptedStateError(f"front position must be positive, got {s}")
    return 1.0 / s ** 2, state.grid.y * state.sdot / s


# ---------------------------------------------------------------------------
# Spatial operator (vertex-centered finite volumes)
# ---------------------------------------------------------------------------

def _weights(grid: Grid, s: float, sdot: float, advection: str):
    """Upwind weight of the left node at every cell face.

    The advective flux ``s' y v`` moves information leftward when ``s' > 0``,
    so full upwinding takes the right value (weight 0).  Hybrid mode keeps
    the centered average while the cell Peclet number ``|s'| y s h`` is at
    most 2, which preserves a nonnegative stencil.
    """
    if advection == "centered" or sdot == 0.0:
        return np.full(grid.M, 0.5)
    up = 0.0 if sdot > 0 else 1.0
    if advection == "upwind":
        return np.full(grid.M, up)
    pe = abs(sdot) * grid.faces * s * grid.h
    return np.where(pe <= 2.0, 0.5, up)


def _face_coeffs(grid: Grid, s: float, sdot: float, alpha):
    """Face flux ``F = v_y / s + s' y v`` as ``a * v_left + b * v_right``."""
    k = 1.0 / (s * grid.h)
    adv = sdot * grid.faces
    return -k + adv * alpha, k + adv * (1.0 - alpha)


def face_flux(grid: Grid, v, s: float, sdot: float, alpha):
    a, b = _face_coeffs(grid, s, sdot, alpha)
    return a * v[:-1] + b * v[1:]


def _flux_partials(grid: Grid, v, s: float, alpha):
    """Derivatives of the face fluxes with respect to ``s`` and ``s'``."""
    dF_ds = -(v[1:] - v[:-1]) / (s * s * grid.h)
    dF_dsd = grid.faces * (alpha * v[:-1] + (1.0 - alpha) * v[1:])
    return dF_ds, dF_dsd


def _interior_matrix(grid: Grid, s: float, a, b, ct: float):
    """Banded ``s W - ct dF`` on rows 1..M-1 (unknowns ``v_1..v_{M-1}``)."""
    w = grid.trap[1:-1]
    lo = ct * a[:-1]                 # coefficient of v_{j-1}
    di = s * w - ct * (a[1:] - b[:-1])
    up = -ct * b[1:]                 # coefficient of v_{j+1}
    ab = np.empty((3, di.size))
    ab[0, 0] = 0.0
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    ab[2, -1] = 0.0
    return ab, lo[0]


def front_speed(grid: Grid, v, s: float, sdot_guess: float, advection: str = "hybrid") -> float:
    """``s' = -F`` at the last face, solved for ``s'`` (the flux depends on it linearly)."""
    alpha = _weights(grid, s, sdot_guess, advection)[-1]
    vm = v[-2]
    k = 1.0 / (s * grid.h[-1])
    return (k * vm - k * v[-1]) / (1.0 + grid.faces[-1] * (alpha * vm + (1.0 - alpha) * v[-1]))


def signed_power(v, p):
    return math.copysign(abs(v) ** p, v)


def solve_flux_scalar(A: float, B: float, p: float, guess: float, tol: float, max_iters: int):
    """Root of ``A + B v - |v|^{p-1} v = 0`` on the branch through small ``|v|``.

    The function is increasing on ``[-v*, v*]`` with ``v* = (B/p)^{1/(p-1)}``;
    no root there means the discrete step has no solution (fold).
    Returns ``(v, iterations)``.
    """
    if not (B > 0) or not math.isfinite(A) or not math.isfinite(B):
        raise StepFailure(StepFailure.NEWTON_DIVERGED, f"degenerate boundary system (A={A}, B={B})")
    log_vstar = (math.log(B) - math.log(p)) / (p - 1.0)
    vstar = math.exp(min(log_vstar, 700.0 / p))

    def F(v):
        return A + B * v - signed_power(v, p)

    if A <= 0:
        lo, hi = 0.0, vstar
    else:
        lo, hi = -vstar, 0.0
    flo, fhi = F(lo), F(hi)
    if flo > 0 or fhi < 0:
        raise StepFailure(StepFailure.NEWTON_DIVERGED,
                          f"boundary relation has no solution (fold), A={A:.3e}, B={B:.3e}")
    v = min(max(guess, lo), hi)
    for it in range(1, max_iters + 1):
        f = F(v)
        scale = abs(A) + abs(B * v) + abs(v) ** p
        if abs(f) <= tol * max(scale, 1e-300):
            return v, it - 1
        if f < 0:
            lo = v
        else:
            hi = v
        df = B - p * abs(v) ** (p - 1.0)
        v_new = v - f / df if df > 0 else 0.5 * (lo + hi)
        if not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)
        if v_new == v or hi - lo <= 4 * EPS * max(abs(lo), abs(hi)):
            return v_new, it
        v = v_new
    raise StepFailure(StepFailure.NEWTON_DIVERGED, f"no convergence in {max_iters} iterations")


# ---------------------------------------------------------------------------
# One time step
# ---------------------------------------------------------------------------

def _front_target(opts: StepOptions, t: float, s_old: float):
    if opts.front == "frozen":
        return s_old, 0.0
    s, sdot = opts.front(t)
    return float(s), float(sdot)


def step(state: SolverState, dt: float, spec: ProblemSpec, opts: StepOptions) -> SolverState:
    """Advance ``state`` by ``dt``; raises :class:`StepFailure` if the step cannot be taken."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    transform_pde_coefficients(state)
    if isinstance(opts.coupling, MonolithicNewton):
        v, s_new, sd_new, iters = _step_monolithic(state, dt, spec, opts)
    else:
        v, s_new, sd_new, iters = _step_picard(state, dt, spec, opts)

    clamped = False
    if opts.front == "stefan":
        if sd_new < -opts.sdot_tol:
            clamped = True
            log.debug("negative front speed %.3e clamped at t=%.6g", sd_new, state.t + dt)
        if s_new < state.s:
            s_new = state.s
        sd_new = max(sd_new, 0.0)

    if not np.all(np.isfinite(v)) or not math.isfinite(s_new):
        raise StepFailure(StepFailure.NEWTON_DIVERGED, "non-finite values")
    vmax = float(np.max(np.abs(v)))
    vmin = float(np.min(v))
    if vmin < -10.0 * EPS * vmax:
        raise StepFailure(StepFailure.POSITIVITY_LOST, f"min v = {vmin:.3e}")
    if vmin < 0:
        v = np.maximum(v, 0.0)
    v[-1] = 0.0
    return SolverState(t=state.t + dt, s=s_new, v=v, sdot=sd_new, grid=state.grid,
                       dt_next=state.dt_next, dt_last=dt, step_count=state.step_count + 1,
                       newton_iters_last=iters, front_clamped=clamped)


def _left_flux(spec, v0: float, g: float) -> float:
    """Heat input ``-u_x(t, 0)`` implied by the boundary mode (not used for Dirichlet)."""
    if isinstance(spec.bc, NeumannZero):
        return g
    return signed_power(v0, spec.p) + g


def _old_part(state: SolverState, dt: float, spec, opts):
    """Right-hand side ``s w v`` at the old level plus the explicit theta share."""
    grid, theta = state.grid, opts.theta
    y, w = grid.y, grid.trap
    rhs = state.s * w * state.v
    if theta < 1.0:
        alpha = _weights(grid, state.s, state.sdot, opts.advection)
        F = face_flux(grid, state.v, state.s, state.sdot, alpha)
        c = dt * (1.0 - theta)
        rhs[1:-1] += c * (F[1:] - F[:-1])
        if not isinstance(spec.bc, DirichletConstant):
            g_old = opts.mms_flux(state.t) if opts.mms_flux is not None else 0.0
            rhs[0] += c * (F[0] + _left_flux(spec, state.v[0], g_old))
        if opts.mms_source is not None:
            rhs += c * state.s * w * opts.mms_source(state.t, y * state.s)
    return rhs[:-1]


def _boundary_value(spec, s, w0, a0, b0, W1, Z1, ct, rhs0, g, guess, opts):
    """Left value ``v0`` from the half-cell balance, given ``v_1 = W1 + v0 Z1``."""
    bc = spec.bc
    if isinstance(bc, DirichletConstant):
        return bc.u0 + g, 0
    diag = s * w0 - ct * a0 - ct * b0 * Z1
    if isinstance(bc, NeumannZero):
        return (rhs0 + ct * b0 * W1 + ct * g) / diag, 0
    return solve_flux_scalar(-(b0 * W1 + g + rhs0 / ct), diag / ct, spec.p, guess,
                             opts.newton_tol, opts.newton_max_iters)


def _step_picard(state, dt, spec, opts):
    grid, theta = state.grid, opts.theta
    y, w = grid.y, grid.trap
    t_new = state.t + dt
    rhs_old = _old_part(state, dt, spec, opts)
    g = opts.mms_flux(t_new) if opts.mms_flux is not None else 0.0
    ct = dt * theta

    if opts.front == "stefan":
        s_k, sd_k = state.s + dt * state.sdot, state.sdot
        sweeps, tol = opts.coupling.max_sweeps, opts.coupling.tol * spec.s0
    else:
        s_k, sd_k = _front_target(opts, t_new, state.s)
        sweeps, tol = 1, math.inf

    v0 = state.v[0]
    iters = 0
    B = np.zeros((grid.M - 1, 2))
    for _ in range(sweeps):
        alpha = _weights(grid, s_k, sd_k, opts.advection)
        a, b = _face_coeffs(grid, s_k, sd_k, alpha)
        ab, lo1 = _interior_matrix(grid, s_k, a, b, ct)
        rhs = rhs_old.copy()
        if opts.mms_source is not None:
            rhs += ct * s_k * w[:-1] * opts.mms_source(t_new, y[:-1] * s_k)
        B[:, 0] = rhs[1:]
        B[:, 1] = 0.0
        B[0, 1] = -lo1
        W = solve_banded((1, 1), ab, B, check_finite=False)
        v0, it = _boundary_value(spec, s_k, w[0], a[0], b[0], W[0, 0], W[0, 1],
                                 ct, rhs[0], g, v0, opts)
        iters += it
        v = np.empty(grid.size)
        v[0] = v0
        v[1:-1] = W[:, 0] + v0 * W[:, 1]
        v[-1] = 0.0
        if opts.front != "stefan":
            return v, s_k, sd_k, iters
        sd_new = -float(a[-1] * v[-2])
        s_new = state.s + dt * (theta * sd_new + (1.0 - theta) * state.sdot)
        if abs(s_new - s_k) <= tol:
            return v, s_new, sd_new, iters
        s_k, sd_k = s_new, sd_new
    raise StepFailure(StepFailure.NEWTON_DIVERGED, "front coupling did not converge")


def _step_monolithic(state, dt, spec, opts):
    """Bordered Newton on interior v with border unknowns (v0, s, s')."""
    grid, theta = state.grid, opts.theta
    y, w = grid.y, grid.trap
    M = grid.M
    t_new = state.t + dt
    ct = dt * theta
    rhs_old = _old_part(state, dt, spec, opts)
    g = opts.mms_flux(t_new) if opts.mms_flux is not None else 0.0
    bc = spec.bc
    p = spec.p
    stefan = opts.front == "stefan"
    if stefan:
        s, sd = state.s + dt * state.sdot, state.sdot
    else:
        s, sd = _front_target(opts, t_new, state.s)
    v = state.v.copy()
    tol = opts.coupling.tol
    for it in range(1, opts.coupling.max_iters + 1):
        alpha = _weights(grid, s, sd, opts.advection)
        a, b = _face_coeffs(grid, s, sd, alpha)
        F = a * v[:-1] + b * v[1:]
        dF_ds, dF_dsd = _flux_partials(grid, v, s, alpha)
        f = opts.mms_source(t_new, y[:-1] * s) if opts.mms_source is not None else np.zeros(M)
        R = s * w[:-1] * v[:-1] - ct * s * w[:-1] * f - rhs_old
        R[1:] -= ct * (F[1:] - F[:-1])
        ab, lo1 = _interior_matrix(grid, s, a, b, ct)
        C = np.zeros((M - 1, 3))
        C[0, 0] = lo1
        C[:, 1] = w[1:-1] * v[1:-1] - ct * (dF_ds[1:] - dF_ds[:-1]) - ct * w[1:-1] * f[1:]
        C[:, 2] = -ct * (dF_dsd[1:] - dF_dsd[:-1])
        Rb = np.zeros(3)
        Jrow = np.zeros((3, M - 1))
        Jb = np.zeros((3, 3))
        if isinstance(bc, DirichletConstant):
            Rb[0] = v[0] - bc.u0 - g
            Jb[0, 0] = 1.0
        else:
            Rb[0] = R[0] - ct * (F[0] + _left_flux(spec, v[0], g))
            dq = 0.0 if isinstance(bc, NeumannZero) else p * abs(v[0]) ** (p - 1.0)
            Jb[0, 0] = s * w[0] - ct * (a[0] + dq)
            Jrow[0, 0] = -ct * b[0]
            Jb[0, 1] = w[0] * v[0] - ct * dF_ds[0] - ct * w[0] * f[0]
            Jb[0, 2] = -ct * dF_dsd[0]
        if stefan:
            Rb[1] = sd + F[-1]
            Jrow[1, -1] = a[-1]
            Jb[1, 1] = dF_ds[-1]
            Jb[1, 2] = 1.0 + dF_dsd[-1]
            Rb[2] = s - state.s - dt * (theta * sd + (1.0 - theta) * state.sdot)
            Jb[2, 1] = 1.0
            Jb[2, 2] = -ct
        else:
            s_t, sd_t = _front_target(opts, t_new, state.s)
            Rb[1], Rb[2] = s - s_t, sd - sd_t
            Jb[1, 1] = Jb[2, 2] = 1.0
        X = solve_banded((1, 1), ab, np.column_stack([-R[1:], C]), check_finite=False)
        X0, Xc = X[:, 0], X[:, 1:]
        S = Jb - Jrow @ Xc
        try:
            db = np.linalg.solve(S, -Rb - Jrow @ X0)
        except np.linalg.LinAlgError:
            raise StepFailure(StepFailure.NEWTON_DIVERGED, "singular border system")
        dv = X0 - Xc @ db
        v[0] += db[0]
        v[1:-1] += dv
        s += db[1]
        sd += db[2]
        if not (math.isfinite(s) and s > 0 and np.all(np.isfinite(v))):
            raise StepFailure(StepFailure.NEWTON_DIVERGED, "iterate left the admissible set")
        scale = max(float(np.max(np.abs(v))), 1e-300)
        if (float(np.max(np.abs(dv))) <= tol * scale and abs(db[0]) <= tol * scale
                and abs(db[1]) <= tol * spec.s0):
            return v, s, sd, it
    raise StepFailure(StepFailure.NEWTON_DIVERGED, f"no convergence in {opts.coupling.max_iters} iterations")


# ---------------------------------------------------------------------------
# Step-size control
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepControl:
    dt_min: float = 1e-12
    dt_max: float = 1e-3
    c_safety: float = 0.5
    c_bu: float = 0.1
    u_floor: float = 1e-8
    growth: float = 1.1
    s_ref: Optional[float] = None   # when set, dt_max scales with (s / s_ref)^2


def blowup_timescale(u0: float, p: float, c_bu: float, u_floor: float) -> float:
    """``c_bu * max(u0, u_floor)^{-2(p-1)}``, the time scale of boundary blow-up."""
    return c_bu * max(u0, u_floor) ** (-2.0 * (p - 1.0))


def adapt_dt(state: SolverState, ctrl: StepControl, p: float) -> float:
    dt_max = ctrl.dt_max
    if ctrl.s_ref is not None:
        dt_max *= max(1.0, (state.s / ctrl.s_ref) ** 2)
    dt = ctrl.c_safety * blowup_timescale(state.u0, p, ctrl.c_bu, ctrl.u_floor)
    if state.dt_last > 0:
        dt = min(dt, ctrl.growth * state.dt_last)
    else:
        dt = min(dt, state.dt_next)
    return min(max(dt, ctrl.dt_min), dt_max)


# ---------------------------------------------------------------------------
# Whole runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Numerics:
    """Grid, step and termination settings of a run.

    ``None`` entries are filled from ``s0`` by :meth:`resolved`:
    ``dt_max = 1e-3 s0^2``, ``t_end = 50 s0^2``, ``record_interval = 1e-2 s0^2``
    and ``dt_init = c_safety (s0/N)^2 / 2``.
    """
    N: int = 400
    theta: float = 1.0
    dt_max: Optional[float] = None
    dt_min: float = 1e-12
    u_max: float = 1e6
    t_end: Optional[float] = None
    checkpoint_times: tuple = ()
    checkpoint_u0_levels: tuple = ()
    record_interval: Optional[float] = None
    record_rel_change: float = 0.05
    c_safety: float = 0.5
    c_bu: float = 0.1
    u_floor: float = 1e-8
    growth: float = 1.1
    dt_init: Optional[float] = None
    max_retries: int = 40
    grading: bool = True
    h_min: float = 1e-8
    grade_ratio: float = 1.1
    advection: str = "hybrid"
    coupling: str = "picard"
    picard_max_sweeps: int = 25
    coupling_tol: float = 1e-10
    newton_tol: float = 1e-12
    newton_max_iters: int = 50
    stop_on_certificate: bool = True
    dt_max_follows_front: bool = False

    def __post_init__(self):
        if self.N < 16:
            raise InvalidSpecError("N must be at least 16")
        if self.dt_max is not None and not self.dt_min < self.dt_max:
            raise InvalidSpecError("dt_min must be below dt_max")
        if self.t_end is not None and not self.t_end > 0:
            raise InvalidSpecError("horizon must be positive")
        if self.coupling not in ("picard", "monolithic"):
            raise InvalidSpecError(f"unknown coupling {self.coupling!r}")

    def resolved(self, s0: float) -> "Numerics":
        dt_max = self.dt_max if self.dt_max is not None else 1e-3 * s0 ** 2
        if not self.dt_min < dt_max:
            raise InvalidSpecError("dt_min must be below dt_max")
        return replace(
            self,
            dt_max=dt_max,
            t_end=self.t_end if self.t_end is not None else 50.0 * s0 ** 2,
            record_interval=self.record_interval if self.record_interval is not None else 1e-2 * s0 ** 2,
            dt_init=self.dt_init if self.dt_init is not None else self.c_safety * (s0 / self.N) ** 2 / 2,
            checkpoint_times=tuple(sorted(float(t) for t in self.checkpoint_times)),
            checkpoint_u0_levels=tuple(sorted(float(u) for u in self.checkpoint_u0_levels)),
        )

    @property
    def t_warmup(self) -> float:
        return 10.0 * self.dt_max

    def step_options(self, **overrides) -> StepOptions:
        coupling = (Picard(self.picard_max_sweeps, self.coupling_tol) if self.coupling == "picard"
                    else MonolithicNewton(self.picard_max_sweeps, self.coupling_tol))
        kw = dict(newton_tol=self.newton_tol, newton_max_iters=self.newton_max_iters,
                  theta=self.theta, advection=self.advection, coupling=coupling)
        kw.update(overrides)
        return StepOptions(**kw)

    def control(self, s0: float) -> StepControl:
        return StepControl(self.dt_min, self.dt_max, self.c_safety, self.c_bu, self.u_floor,
                           self.growth, s0 if self.dt_max_follows_front else None)

    def grid(self) -> Grid:
        return Grid(make_nodes(self.N, self.grading, self.h_min, self.grade_ratio))


def initial_state(spec: ProblemSpec, num: Numerics, grid: Grid = None, front: FrontMotion = "stefan") -> SolverState:
    if not spec.lam > 0:
        raise InvalidSpecError("a run needs lambda > 0")
    grid = grid or num.grid()
    prof = spec.initial_profile()
    v = prof(grid.y * spec.s0)
    v[-1] = 0.0
    if isinstance(spec.bc, DirichletConstant):
        v[0] = spec.bc.u0
    if front == "stefan":
        sdot = max(front_speed(grid, v, spec.s0, 0.0, num.advection), 0.0)
    elif front == "frozen":
        sdot = 0.0
    else:
        sdot = float(front(0.0)[1])
    return SolverState(t=0.0, s=spec.s0, v=v, sdot=sdot, grid=grid, dt_next=num.dt_init)


def make_record(state: SolverState, p: float, dt: float, iters: int) -> DiagnosticsRecord:
    x = state.x
    v = state.v
    return DiagnosticsRecord(
        t=float(state.t), s=float(state.s), sdot=float(state.sdot), u0=float(v[0]),
        linf=float(np.max(v)), l1=float(state.s * state.grid.integrate(v)),
        energy=float(energy(x, v, p)), dt=float(dt), newton_iters=int(iters))


def run(spec: ProblemSpec, numerics: Numerics = None, opts: StepOptions = None) -> Trajectory:
    """Integrate from ``t = 0`` until the horizon, blow-up, a decay certificate or failure."""
    num = (numerics or Numerics()).resolved(spec.s0)
    opts = opts or num.step_options()
    grid = num.grid()
    state = initial_state(spec, num, grid, opts.front)
    ctrl = num.control(spec.s0)
    p = spec.p
    flux_mode = isinstance(spec.bc, NonlinearFlux)

    traj = Trajectory(spec=spec, numerics=num, t_warmup=num.t_warmup)
    traj.append(make_record(state, p, 0.0, 0), 0.0, 0.0, 0.0)
    cps = list(num.checkpoint_times)
    levels = list(num.checkpoint_u0_levels)

    def store_checkpoint():
        traj.checkpoints.append(Checkpoint(state.t, state.s, state.x.copy(), state.v.copy(),
                                           len(traj.records) - 1))

    if cps and cps[0] <= 0.0:
        store_checkpoint()
        cps = [c for c in cps if c > 0.0]

    def heat_input(old, new, dt):
        """Boundary heat input over one step.

        With the flux condition this is the trapezoid rule on ``u(., 0)^p``.
        For a Dirichlet end it is read off the balance of the first half cell.
        """
        if flux_mode:
            return 0.5 * dt * (old.v[0] ** p + new.v[0] ** p)
        if isinstance(spec.bc, NeumannZero):
            return 0.0
        w0 = grid.trap[0]
        F = [face_flux(grid, st.v, st.s, st.sdot,
                       _weights(grid, st.s, st.sdot, opts.advection))[0] for st in (old, new)]
        theta = opts.theta
        return (new.s * w0 * new.v[0] - old.s * w0 * old.v[0]
                - dt * (theta * F[1] + (1.0 - theta) * F[0]))

    Q = diss = cubic = 0.0
    t_rec, u_rec = 0.0, state.u0
    status = None
    t_end = num.t_end
    while status is None:
        target = t_end
        if cps:
            target = min(target, cps[0])
        dt = min(state.dt_next, target - state.t)
        retries = 0
        while True:
            try:
                new = step(state, dt, spec, opts)
                break
            except StepFailure as exc:
                retries += 1
                if retries > num.max_retries:
                    log.warning("giving up at t=%.6g after %d retries: %s", state.t, retries - 1, exc)
                    traj.failure_time = state.t
                    traj.flags.append(f"step failure at t={state.t!r}: {exc}")
                    status = NUMERICAL_FAILURE
                    break
                dt *= 0.5
        if status is not None:
            break

        if abs(new.t - target) <= 1e-12 * max(1.0, abs(target)):
            new.t = target
        # running integrals, trapezoid in time
        Q += heat_input(state, new, dt)
        cubic += 0.5 * dt * (state.sdot ** 3 + new.sdot ** 3)
        vy = grid.gradient(new.v)
        ut = (new.v - state.v) / dt - grid.y * (new.sdot / new.s) * vy
        diss += dt * new.s * grid.integrate(ut * ut)
        if new.front_clamped:
            traj.flags.append(f"front speed clamped at t={new.t!r}")

        state = new
        state.dt_next = adapt_dt(state, ctrl, p)
        u0 = state.u0

        if flux_mode and (u0 >= num.u_max or
                          num.c_safety * blowup_timescale(u0, p, num.c_bu, num.u_floor) <= num.dt_min):
            status = BLOWUP_DETECTED
        elif state.t >= t_end:
            status = REACHED_HORIZON

        linf = float(np.max(state.v))
        if flux_mode and traj.certificate_time is None and linf <= certificate_threshold(state.s, p):
            traj.certificate_time = state.t
            if num.stop_on_certificate and status is None:
                status = DECAY_CERTIFIED

        at_cp = bool(cps) and state.t >= cps[0]
        crossed = bool(levels) and u0 >= levels[0]
        if (status is not None or at_cp or crossed
                or state.t - t_rec >= num.record_interval * (1 - 1e-9)
                or abs(u0 - u_rec) > num.record_rel_change * max(u_rec, 1e-300)):
            traj.append(make_record(state, p, dt, state.newton_iters_last), Q, diss, cubic)
            t_rec, u_rec = state.t, u0
        if at_cp:
            store_checkpoint()
            cps.pop(0)
        if crossed:
            store_checkpoint()
            while levels and u0 >= levels[0]:
                levels.pop(0)

    if status == NUMERICAL_FAILURE and state.t > traj.records[-1].t:
        traj.append(make_record(state, p, state.dt_last, state.newton_iters_last), Q, diss, cubic)
    traj.status = status
    traj.t_final = traj.records[-1].t
    log.info("run finished: %s at t=%.6g after %d steps", status, traj.t_final, state.step_count)
    return traj
