"""Functionals, identity residuals and a-priori criteria evaluated on trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, astuple
from typing import Optional

import numpy as np

from .errors import NotComputable
from .model import InitialProfile, ProblemSpec
from .reference import decay_delta

ENERGY_BOUND_CONST = math.pi ** 2 / 256.0

RECORD_FIELDS = ("t", "s", "sdot", "u0", "linf", "l1", "energy", "dt", "newton_iters")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    s: float
    sdot: float
    u0: float
    linf: float
    l1: float
    energy: float
    dt: float
    newton_iters: int

    def as_tuple(self):
        return astuple(self)


@dataclass
class Checkpoint:
    t: float
    s: float
    x: np.ndarray
    u: np.ndarray
    index: int   # record index at which the checkpoint was taken


# terminal statuses
REACHED_HORIZON = "ReachedHorizon"
BLOWUP_DETECTED = "BlowUpDetected"
DECAY_CERTIFIED = "DecayCertified"
NUMERICAL_FAILURE = "NumericalFailure"
RUNNING = "Running"


@dataclass
class Trajectory:
    """Time series of diagnostics records plus optional stored profiles.

    The running integrals ``flux_integral`` (boundary heat input), ``dissipation``
    (``int int |u_t|^2``) and ``front_cubic`` (``int s'^3``) are accumulated at
    every accepted step and sampled at each record.  Trajectories rebuilt from
    CSV or built synthetically may lack them.
    """
    spec: Optional[ProblemSpec]
    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    status: str = RUNNING
    t_final: float = 0.0
    flux_integral: Optional[list] = None
    dissipation: Optional[list] = None
    front_cubic: Optional[list] = None
    certificate_time: Optional[float] = None
    failure_time: Optional[float] = None
    flags: list = field(default_factory=list)
    t_warmup: float = 0.0
    numerics: object = None

    def append(self, rec: DiagnosticsRecord, flux=None, diss=None, cubic=None):
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError("records must be strictly increasing in time")
        self.records.append(rec)
        if flux is not None:
            for name, val in (("flux_integral", flux), ("dissipation", diss), ("front_cubic", cubic)):
                if getattr(self, name) is None:
                    setattr(self, name, [])
                getattr(self, name).append(float(val))
        self.t_final = rec.t

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        if name in RECORD_FIELDS:
            return np.array([getattr(r, name) for r in self.records], dtype=float)
        val = getattr(self, name, None)
        if val is None:
            raise NotComputable(f"trajectory has no {name!r} data")
        return np.asarray(val, dtype=float)

    def checkpoint_at(self, t: float, rtol: float = 1e-9) -> Checkpoint:
        for cp in self.checkpoints:
            if abs(cp.t - t) <= rtol * max(1.0, abs(t)):
                return cp
        raise NotComputable(f"no checkpoint stored at t={t}")

    @classmethod
    def from_columns(cls, spec=None, status=RUNNING, **cols):
        """Build a trajectory from equal-length arrays (missing columns default to 0)."""
        t = np.asarray(cols["t"], float)
        n = t.size
        data = {k: np.broadcast_to(np.asarray(cols.get(k, 0.0), float), (n,)) for k in RECORD_FIELDS}
        traj = cls(spec=spec, status=status)
        for i in range(n):
            traj.append(DiagnosticsRecord(*(float(data[k][i]) for k in RECORD_FIELDS[:-1]),
                                          int(data["newton_iters"][i])))
        return traj


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

def nodal_gradient(x, u):
    """du/dx at the nodes: three-point centered inside, three-point one-sided at the ends."""
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    h = np.diff(x)
    g = np.empty_like(u)
    if u.size == 2:
        g[:] = (u[1] - u[0]) / h[0]
        return g
    hm, hp = h[:-1], h[1:]
    s = hm + hp
    g[1:-1] = (-hp / (hm * s)) * u[:-2] + ((hp - hm) / (hm * hp)) * u[1:-1] + (hm / (hp * s)) * u[2:]
    h1, h2 = h[0], h[1]
    g[0] = (-(2 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1]
            - h1 / (h2 * (h1 + h2)) * u[2])
    a, b = h[-2], h[-1]
    g[-1] = b / (a * (a + b)) * u[-3] - (a + b) / (a * b) * u[-2] + (2 * b + a) / (b * (a + b)) * u[-1]
    return g


def energy(x, u, p: float) -> float:
    """``(1/2) int |u_x|^2 - u(0)^{p+1} / (p+1)`` on the sampled profile.

    Gradient squares are integrated with the composite trapezoid rule.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    g = nodal_gradient(x, u)
    return 0.5 * float(np.trapezoid(g * g, x)) - u[0] ** (p + 1) / (p + 1)


def profile_energy(profile: InitialProfile, p: float) -> float:
    """Energy of a piecewise-linear profile, exact per cell."""
    slopes = np.diff(profile.values) / np.diff(profile.x)
    return 0.5 * float(np.sum(slopes ** 2 * np.diff(profile.x))) - profile.values[0] ** (p + 1) / (p + 1)


def mass_balance_residual(traj: Trajectory, k: int) -> float:
    """``| ||u(t_k)||_1 - ||u(0)||_1 - s0 + s(t_k) - int_0^{t_k} (-u_x(., 0)) |``."""
    if not 0 <= k < len(traj.records):
        raise IndexError(k)
    r0, rk = traj.records[0], traj.records[k]
    if traj.flux_integral is not None:
        Q = traj.flux_integral[k]
    else:
        if traj.spec is None:
            raise NotComputable("boundary flux integral unavailable")
        t = traj.column("t")[: k + 1]
        Q = float(np.trapezoid(traj.column("u0")[: k + 1] ** traj.spec.p, t)) if k else 0.0
    return abs(rk.l1 - r0.l1 - r0.s + rk.s - Q)


def energy_identity_residual(traj: Trajectory, k1: int, k2: int) -> float:
    """Mismatch of the energy dissipation identity between records ``k1 <= k2``."""
    if k1 == k2:
        return 0.0
    if k1 > k2:
        raise ValueError("need k1 <= k2")
    if traj.dissipation is None or traj.front_cubic is None:
        raise NotComputable("dissipation integrals were not accumulated for this trajectory")
    diss = traj.dissipation[k2] - traj.dissipation[k1]
    cubic = traj.front_cubic[k2] - traj.front_cubic[k1]
    drop = traj.records[k1].energy - traj.records[k2].energy
    return abs(diss + 0.5 * cubic - drop)


def energy_lower_bound(record: DiagnosticsRecord) -> float:
    l1, s = record.l1, record.s
    if l1 <= 0:
        return 0.0
    return ENERGY_BOUND_CONST * l1 ** 3 / (s + l1) ** 4


@dataclass(frozen=True)
class CriterionResult:
    predicts_blowup: bool
    energy: float
    threshold: float
    margin: float
    advisory: bool = True   # the regularity hypothesis behind the criterion is not checked


def blowup_criterion(s0: float, profile: InitialProfile, p: float) -> CriterionResult:
    """Negative-energy test: blow-up is predicted when ``E(s0, phi)`` is below
    ``(pi^2/256) ||phi||_1^3 / (s0 + ||phi||_1)^4``.
    """
    E = profile_energy(profile, p)
    l1 = profile.l1_norm()
    threshold = ENERGY_BOUND_CONST * l1 ** 3 / (s0 + l1) ** 4
    return CriterionResult(bool(E < threshold), E, threshold, threshold - E)


def certificate_threshold(s: float, p: float) -> float:
    return decay_delta(p) * min(1.0, s ** (-1.0 / (p - 1.0)))


def decay_certificate(record: DiagnosticsRecord, p: float) -> bool:
    """True when the sup norm is small enough for the explicit supersolution,
    restarted at this record, to dominate the solution."""
    return bool(record.linf <= certificate_threshold(record.s, p))


def rescaled_profile(traj: Trajectory, t_hat: float, M: float = None, p: float = None):
    """Blow-up rescaling ``y -> M^{-1} u(t_hat, M^{-(p-1)} y)``.

    ``M`` defaults to the running maximum of ``u(., 0)`` over records up to
    ``t_hat``.  Returns ``(y, w)`` on the checkpoint's own nodes, and a
    callable evaluating ``w`` by linear interpolation.
    """
    cp = traj.checkpoint_at(t_hat)
    if p is None:
        p = traj.spec.p
    if M is None:
        t = traj.column("t")
        M = float(np.max(traj.column("u0")[t <= cp.t * (1 + 1e-12)]))
        M = max(M, float(cp.u[0]))
    lam = M ** (-(p - 1.0))
    scale = lam ** (1.0 / (p - 1.0))
    y = cp.x / lam
    w = scale * cp.u

    def evaluate(yy):
        return np.interp(np.asarray(yy, float) * lam, cp.x, cp.u, right=0.0) * scale

    return y, w, evaluate


def energy_monotonicity_violation(traj: Trajectory, t_from: float = 0.0) -> float:
    """Largest increase of the recorded energy between consecutive records after ``t_from``."""
    t = traj.column("t")
    E = traj.column("energy")
    sel = t >= t_from
    if sel.sum() < 2:
        return 0.0
    inc = np.diff(E[sel])
    return float(max(inc.max(), 0.0))
