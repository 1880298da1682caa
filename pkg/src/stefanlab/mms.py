"""Manufactured solutions on a frozen front and observed convergence orders.

Each manufactured solution ``u_ex`` comes with the source ``f = u_t - u_xx``
and the boundary correction ``g`` that make it an exact solution of the
solver's equations.  Runs use fixed steps from exact initial data; the error
is the maximum nodal error at the final time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidSpecError
from .grid import Grid, make_nodes
from .model import LinearProfileSpec, NonlinearFlux, ProblemSpec


@dataclass(frozen=True)
class Manufactured:
    name: str
    s: float
    u: Callable      # u(t, x)
    source: Callable  # f(t, x)
    flux: Callable    # g(t), added to the left boundary relation


def linear_decay(s: float = 1.0, p: float = 3.0) -> Manufactured:
    """``u = e^{-t} (s - x)``: linear in space, so only the time step errs."""
    def u(t, x):
        return math.exp(-t) * (s - np.asarray(x, float))

    def f(t, x):
        return -u(t, x)

    def g(t):
        # -u_x(0) = u(0)^p + g
        return math.exp(-t) - (s * math.exp(-t)) ** p

    return Manufactured("linear_decay", s, u, f, g)


def cosine_mode(s: float = 1.0, p: float = 3.0) -> Manufactured:
    """``u = e^{-t} (cos(pi x / 2s) + sin(pi x / s))``, vanishing at ``x = s``."""
    k1, k2 = math.pi / (2 * s), math.pi / s

    def u(t, x):
        x = np.asarray(x, float)
        return math.exp(-t) * (np.cos(k1 * x) + np.sin(k2 * x))

    def f(t, x):
        x = np.asarray(x, float)
        return math.exp(-t) * ((k1 ** 2 - 1.0) * np.cos(k1 * x) + (k2 ** 2 - 1.0) * np.sin(k2 * x))

    def g(t):
        # u_x(0) = e^{-t} k2
        return -math.exp(-t) * k2 - math.exp(-p * t)

    return Manufactured("cosine_mode", s, u, f, g)


def mms_error(ms: Manufactured, N: int, dt: float, t_end: float, theta: float = 1.0,
              p: float = 3.0, grading: bool = False, advection: str = "centered") -> float:
    """Max nodal error at ``t_end`` of a fixed-step run on a frozen front."""
    from .solver import SolverState, StepOptions, step

    n = int(round(t_end / dt))
    if n < 1 or not math.isclose(n * dt, t_end, rel_tol=1e-9):
        raise InvalidSpecError("t_end must be a whole number of steps")
    grid = Grid(make_nodes(N, grading))
    spec = ProblemSpec(p, ms.s, LinearProfileSpec(1.0), 1.0, NonlinearFlux())
    opts = StepOptions(theta=theta, advection=advection, front="frozen",
                       mms_source=ms.source, mms_flux=ms.flux)
    x = grid.y * ms.s
    v = ms.u(0.0, x)
    v[-1] = 0.0
    state = SolverState(t=0.0, s=ms.s, v=v, sdot=0.0, grid=grid, dt_next=dt)
    for k in range(1, n + 1):
        state = step(state, dt, spec, opts)
        state.t = k * dt
    return float(np.max(np.abs(state.v - ms.u(t_end, x))))


@dataclass(frozen=True)
class ConvergenceTable:
    kind: str
    theta: float
    sizes: tuple     # h or dt per level
    errors: tuple
    orders: tuple    # pairwise log2 ratios
    fitted: float    # least-squares slope of log error vs log size

    def rows(self):
        return [{"level": i, "size": h, "error": e, "order": (self.orders[i - 1] if i else None)}
                for i, (h, e) in enumerate(zip(self.sizes, self.errors))]


def _table(kind, theta, sizes, errors):
    orders = tuple(math.log(errors[i] / errors[i + 1]) / math.log(sizes[i] / sizes[i + 1])
                   for i in range(len(sizes) - 1))
    fitted = float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])
    return ConvergenceTable(kind, theta, tuple(sizes), tuple(errors), orders, fitted)


def temporal_convergence(theta: float = 1.0, levels: int = 3, dt0: float = 0.1,
                         t_end: float = 1.0, N: int = 64) -> ConvergenceTable:
    """Halve ``dt`` ``levels - 1`` times on the linear solution."""
    if levels < 3:
        raise InvalidSpecError("need at least 3 refinement levels")
    ms = linear_decay()
    dts = [dt0 / 2 ** k for k in range(levels)]
    errs = [mms_error(ms, N, dt, t_end, theta) for dt in dts]
    return _table("temporal", theta, dts, errs)


def spatial_convergence(levels: int = 3, N0: int = 16, t_end: float = 0.1,
                        dt: float = 1e-3) -> ConvergenceTable:
    """Double ``N`` ``levels - 1`` times on the cosine solution (trapezoidal in time)."""
    if levels < 3:
        raise InvalidSpecError("need at least 3 refinement levels")
    ms = cosine_mode()
    Ns = [N0 * 2 ** k for k in range(levels)]
    errs = [mms_error(ms, N, dt, t_end, 0.5) for N in Ns]
    return _table("spatial", 0.5, [1.0 / N for N in Ns], errs)
