"""Long-time classification of trajectories and bracketing of critical amplitudes.

A trajectory is sorted into exponential decay, slow decay with an unbounded
front, or blow-up.  Rates are fitted from the recorded diagnostics; the
critical amplitude separating global solutions from blow-up is bracketed by
bisection in the amplitude ``lam``, which is valid because the comparison
principle makes blow-up monotone in ``lam``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from .diagnostics import BLOWUP_DETECTED, NUMERICAL_FAILURE, Trajectory
from .errors import BadBracketError, NotComputable
from .model import ProblemSpec

log = logging.getLogger(__name__)

EXPONENTIAL_DECAY = "ExponentialDecay"
SLOW_DECAY = "SlowDecay"
BLOW_UP = "BlowUp"
UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ClassifierRules:
    """Thresholds of :func:`classify`.

    ``rate_min`` is in units of ``1 / s0^2``; the two front tolerances are
    relative increases of ``s`` over the last half of the time span.
    """
    rate_min: float = 1e-2
    front_plateau_tol: float = 0.01
    front_growth_min: float = 0.2
    min_records: int = 50
    blowup_min_records: int = 20
    blowup_u0_min: float = 10.0


@dataclass(frozen=True)
class BlowupFit:
    t_hat: float
    gamma: float
    c: float
    residual: float
    ratio_to_bound: float   # gamma / (1 / (2 (p - 1)))
    n_points: int
    flags: tuple = ()


@dataclass(frozen=True)
class GrowthFit:
    beta: float
    confidence: float       # 95% half-width of the slope
    front_flux_ratio: float  # s / int_0^t u(., 0)^p at the final record
    ratio_trend: tuple      # (t, |ratio - 1|) over the last decade
    trend_decreasing: bool


@dataclass
class ClassificationReport:
    verdict: str
    decay_rate: Optional[float] = None
    blowup_time_estimate: Optional[float] = None
    blowup_exponent: Optional[float] = None
    front_limit: Optional[float] = None
    growth_exponent: Optional[float] = None
    growth_confidence: Optional[float] = None
    certificate_time: Optional[float] = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def _second_half(t):
    return t >= t[0] + 0.5 * (t[-1] - t[0])


def _line(x, y):
    """Least-squares slope and intercept."""
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1])


def estimate_blowup(traj: Trajectory, p: float, u0_min: float = 10.0,
                    min_points: int = 20) -> BlowupFit:
    """Fit ``log u0 = -gamma log(T_hat - t) + c`` to the large-``u0`` records.

    For fixed ``T_hat`` the fit is linear; ``T_hat`` itself is found by a
    bounded scalar search over ``log(T_hat - t_last)``, with ``T_hat`` at
    most 10% of the fitted time span beyond the last record.
    """
    t = traj.column("t")
    u = traj.column("u0")
    sel = u >= u0_min
    if sel.sum() < min_points:
        raise NotComputable(f"only {int(sel.sum())} records with u0 >= {u0_min}")
    t, u = t[sel], u[sel]
    flags = []
    if np.any(np.diff(u) <= 0):
        flags.append("fit-failed: tail of u(., 0) is not increasing")
    logu = np.log(u)
    t_last = t[-1]
    span = t_last - t[0]
    if not span > 0:
        raise NotComputable("fit records span no time")

    def fit(eta):
        tau = np.log(t_last + math.exp(eta) - t)
        slope, c = _line(-tau, logu)
        r = logu - (-slope * tau + c)
        return float(r @ r), slope, c

    lo = math.log(max(abs(t_last), span) * 1e-15)
    hi = math.log(0.1 * span)
    res = minimize_scalar(lambda e: fit(e)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 2000})
    sse, gamma, c = fit(res.x)
    if res.x > hi - 1e-6:
        flags.append("blow-up time estimate at the search limit")
    return BlowupFit(t_hat=float(t_last + math.exp(res.x)), gamma=float(gamma), c=float(c),
                     residual=math.sqrt(sse / len(t)), ratio_to_bound=float(gamma * 2.0 * (p - 1.0)),
                     n_points=int(len(t)), flags=tuple(flags))


def _flux_integral(traj: Trajectory) -> np.ndarray:
    if traj.flux_integral is not None:
        return np.asarray(traj.flux_integral, float)
    if traj.spec is None:
        raise NotComputable("boundary flux integral unavailable")
    t = traj.column("t")
    f = traj.column("u0") ** traj.spec.p
    return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (f[1:] + f[:-1]))])


def fit_growth_exponent(traj: Trajectory, min_growth: float = 3.0) -> GrowthFit:
    """Slope of ``log s`` against ``log t`` over the last decade of time,
    plus the ratio of the front to the accumulated boundary heat input
    (NaN when the trajectory carries no flux data and no problem spec)."""
    t = traj.column("t")
    s = traj.column("s")
    if s[-1] < min_growth * s[0]:
        raise NotComputable(f"front grew only {s[-1] / s[0]:.3g}x (need {min_growth}x)")
    sel = (t >= t[-1] / 10.0) & (t > 0)
    if sel.sum() < 3:
        raise NotComputable("fewer than 3 records in the last decade")
    reg = stats.linregress(np.log(t[sel]), np.log(s[sel]))
    q = stats.t.ppf(0.975, sel.sum() - 2) if sel.sum() > 2 else math.inf
    try:
        Q = _flux_integral(traj)
    except NotComputable:
        Q = np.full_like(s, math.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = s / Q
    dev = np.abs(ratio[sel] - 1.0)
    # trend: compare the first and last thirds of the last decade
    k = max(len(dev) // 3, 1)
    decreasing = bool(np.mean(dev[-k:]) < np.mean(dev[:k]))
    return GrowthFit(beta=float(reg.slope), confidence=float(q * reg.stderr),
                     front_flux_ratio=float(ratio[-1]),
                     ratio_trend=tuple(zip(t[sel].tolist(), dev.tolist())),
                     trend_decreasing=decreasing)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def classify(traj: Trajectory, rules: ClassifierRules = ClassifierRules(),
             p: float = None, s0: float = None) -> ClassificationReport:
    """Verdict from the records and the terminal status (pure function)."""
    if p is None and traj.spec is not None:
        p = traj.spec.p
    t = traj.column("t")
    if s0 is None:
        s0 = traj.spec.s0 if traj.spec is not None else float(traj.column("s")[0])
    rep = ClassificationReport(UNDETERMINED, certificate_time=traj.certificate_time)
    if traj.status == BLOWUP_DETECTED:
        rep.verdict = BLOW_UP
        try:
            fit = estimate_blowup(traj, p, rules.blowup_u0_min, rules.blowup_min_records)
            rep.blowup_time_estimate = fit.t_hat
            rep.blowup_exponent = fit.gamma
            rep.flags.extend(fit.flags)
        except NotComputable as exc:
            rep.flags.append(f"blow-up fit not computable: {exc}")
        return rep
    if traj.status == NUMERICAL_FAILURE:
        rep.flags.append("numerical failure")
    if len(t) < rules.min_records and traj.certificate_time is None:
        rep.flags.append(f"too few records ({len(t)} < {rules.min_records})")
        return rep

    u = traj.column("u0")
    s = traj.column("s")
    half = _second_half(t)
    pos = half & (u > 0)
    slope = _line(t[pos], np.log(u[pos]))[0] if pos.sum() >= 2 else math.nan
    s_half = s[half]
    growth = (s_half[-1] - s_half[0]) / s_half[0]

    fitted_decay = slope <= -rules.rate_min / s0 ** 2 and growth <= rules.front_plateau_tol
    if traj.certificate_time is not None or fitted_decay:
        rep.verdict = EXPONENTIAL_DECAY
        if slope < 0:
            rep.decay_rate = -slope
            sd = traj.records[-1].sdot
            rep.front_limit = float(s[-1] + sd / rep.decay_rate)
        else:
            rep.flags.append("decay certified but no decreasing trend in u(., 0) to fit a rate")
            rep.front_limit = float(s[-1])
        return rep
    if slope < 0 and growth >= rules.front_growth_min:
        rep.verdict = SLOW_DECAY
        try:
            g = fit_growth_exponent(traj)
            rep.growth_exponent = g.beta
            rep.growth_confidence = g.confidence
        except NotComputable as exc:
            rep.flags.append(f"growth exponent not computable: {exc}")
        return rep
    rep.flags.append("horizon too short to decide")
    return rep


# ---------------------------------------------------------------------------
# Amplitude scans
# ---------------------------------------------------------------------------

def run_verdict(template: ProblemSpec, lam: float, numerics=None,
                rules: ClassifierRules = ClassifierRules()):
    """Run at amplitude ``lam`` and classify; returns ``(verdict, report, status)``."""
    from .solver import run
    traj = run(template.with_lambda(lam), numerics)
    rep = classify(traj, rules)
    return rep.verdict, rep, traj.status


def _evaluate(args):
    template, lam, numerics, rules = args
    verdict, rep, status = run_verdict(template, lam, numerics, rules)
    return lam, verdict, rep, status


def evaluate_many(template, lams, numerics=None, rules=ClassifierRules(), jobs: int = 1):
    """Run and classify several amplitudes, concurrently when ``jobs > 1``.
    Results come back in the order of ``lams``."""
    tasks = [(template, float(l), numerics, rules) for l in lams]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_evaluate, tasks))
    return [_evaluate(a) for a in tasks]


@dataclass
class Bisection:
    bracket: tuple
    log: list              # (lam, verdict) in evaluation order
    flags: list = field(default_factory=list)

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]

    @property
    def midpoint(self):
        return 0.5 * (self.bracket[0] + self.bracket[1])


def bisect_lambda(predicate: Callable[[float], str], lam_lo: float, lam_hi: float,
                  tol: float, endpoint_verdicts: Sequence = None, max_iters: int = 200) -> Bisection:
    """Bracket the amplitude where the verdict flips to blow-up.

    ``predicate(lam)`` returns a verdict string.  Undetermined midpoints are
    treated as not blowing up and flagged.  ``endpoint_verdicts`` may supply
    already computed verdicts at the two ends (e.g. from concurrent runs).
    """
    if not lam_lo < lam_hi or not tol > 0:
        raise BadBracketError(f"need lam_lo < lam_hi and tol > 0, got {lam_lo}, {lam_hi}, {tol}")
    v_lo, v_hi = endpoint_verdicts if endpoint_verdicts is not None else (predicate(lam_lo), predicate(lam_hi))
    out = Bisection((lam_lo, lam_hi), [(lam_lo, v_lo), (lam_hi, v_hi)])
    if v_lo == BLOW_UP:
        raise BadBracketError(f"lower end lam={lam_lo} already blows up")
    if v_hi != BLOW_UP:
        raise BadBracketError(f"upper end lam={lam_hi} does not blow up ({v_hi})")
    lo, hi = lam_lo, lam_hi
    for _ in range(max_iters):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        v = predicate(mid)
        out.log.append((mid, v))
        if v == UNDETERMINED:
            out.flags.append(f"horizon-too-short at lam={mid!r}")
        if v == BLOW_UP:
            hi = mid
        else:
            lo = mid
        log.info("bisection bracket [%.6g, %.6g]", lo, hi)
    out.bracket = (lo, hi)
    return out


def bisect_lambda_runs(template: ProblemSpec, lam_lo: float, lam_hi: float, tol: float,
                       numerics=None, rules: ClassifierRules = ClassifierRules(), jobs: int = 1):
    """:func:`bisect_lambda` driven by simulations; endpoints run concurrently.

    Returns ``(Bisection, reports)`` where ``reports`` maps each evaluated
    amplitude to its classification report and terminal status.
    """
    reports = {}
    ends = evaluate_many(template, [lam_lo, lam_hi], numerics, rules, jobs)
    for lam, verdict, rep, status in ends:
        reports[lam] = (rep, status)

    def predicate(lam):
        _, verdict, rep, status = _evaluate((template, lam, numerics, rules))
        reports[lam] = (rep, status)
        return verdict

    bis = bisect_lambda(predicate, lam_lo, lam_hi, tol,
                        endpoint_verdicts=(ends[0][1], ends[1][1]))
    return bis, reports


def verdict_audit(lams, verdicts) -> dict:
    """Check that verdicts, sorted by amplitude, are non-blow-up then blow-up."""
    order = np.argsort(lams)
    seq = [verdicts[i] == BLOW_UP for i in order]
    flips = sum(1 for a, b in zip(seq[:-1], seq[1:]) if a != b)
    bad = [float(np.asarray(lams)[order][i + 1]) for i in range(len(seq) - 1) if seq[i] and not seq[i + 1]]
    ok = not bad
    return {"single_flip": bool(ok and flips <= 1), "flips": int(flips), "violations": bad}


@dataclass
class LowerBracket:
    certified_max: float
    slow_decay_min: Optional[float]
    one_sided: bool
    flags: list


def bracket_lambda_lower(lams, verdicts, certified) -> LowerBracket:
    """Interval estimate of the lower critical amplitude from a scan.

    ``certified[i]`` says whether the run at ``lams[i]`` fired the decay
    certificate.  The estimate is the largest certified amplitude together
    with the smallest amplitude classified as slow decay.
    """
    lams = np.asarray(lams, float)
    certified = np.asarray(certified, bool)
    if not certified.any():
        raise NotComputable("no run on the grid certified decay")
    order = np.argsort(lams)
    lams, certified = lams[order], certified[order]
    verdicts = [verdicts[i] for i in order]
    flags = []
    top = float(lams[certified].max())
    below = lams <= top
    if not certified[below].all():
        flags.append("certified set is not down-closed on the grid (numerics error)")
    slow = [l for l, v in zip(lams, verdicts) if v == SLOW_DECAY and l > top]
    one_sided = not slow
    if one_sided:
        flags.append("one-sided: no slow-decay run above the certified ones")
    return LowerBracket(top, float(min(slow)) if slow else None, one_sided, flags)


# ---------------------------------------------------------------------------
# Ordering of two runs
# ---------------------------------------------------------------------------

@dataclass
class OrderingReport:
    max_violation: float        # largest (small - big), either s or u, relative-free
    max_front_violation: float
    location: Optional[tuple]   # (t, x) of the largest profile violation
    n_checkpoints: int
    tolerance: float
    ok: bool


def compare_runs(small: Trajectory, big: Trajectory, eps_rel: float = 1e-8) -> OrderingReport:
    """Check ``s_small <= s_big`` and ``u_small <= u_big`` at common checkpoints.

    ``u_big`` is interpolated onto the nodes of the smaller run; the
    tolerance is ``eps_rel`` times the largest ``|u_big|`` seen.
    """
    pairs = []
    for a in small.checkpoints:
        for b in big.checkpoints:
            if abs(a.t - b.t) <= 1e-9 * max(1.0, abs(a.t)):
                pairs.append((a, b))
                break
    if not pairs:
        raise NotComputable("no common checkpoints")
    worst_u, worst_s, where = -math.inf, -math.inf, None
    scale = 0.0
    for a, b in pairs:
        ub = np.interp(a.x, b.x, b.u, right=0.0)
        d = a.u - ub
        i = int(np.argmax(d))
        if d[i] > worst_u:
            worst_u, where = float(d[i]), (a.t, float(a.x[i]))
        worst_s = max(worst_s, a.s - b.s)
        scale = max(scale, float(np.max(np.abs(b.u))))
    tol = eps_rel * scale
    worst = max(worst_u, worst_s, 0.0)
    return OrderingReport(max_violation=worst, max_front_violation=max(worst_s, 0.0),
                          location=where if worst_u > 0 else None, n_checkpoints=len(pairs),
                          tolerance=tol, ok=bool(worst_u <= tol and worst_s <= tol))
