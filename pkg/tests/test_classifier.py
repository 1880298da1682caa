import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stefanlab.classifier import (BLOW_UP, EXPONENTIAL_DECAY, SLOW_DECAY, UNDETERMINED,
                                  bisect_lambda, bracket_lambda_lower, classify,
                                  compare_runs, estimate_blowup, fit_growth_exponent, verdict_audit)
from stefanlab.diagnostics import (BLOWUP_DETECTED, DECAY_CERTIFIED, REACHED_HORIZON, Checkpoint,
                                   Trajectory)
from stefanlab.errors import BadBracketError, NotComputable
from stefanlab.output import read_records_csv, write_records_csv


def exp_decay_traj():
    # u0 = 0.3 e^{-t}, s = 1.5 - 0.5 e^{-t}: rate 1 and front limit 1.5
    t = np.linspace(0.0, 20.0, 201)
    e = np.exp(-t)
    return Trajectory.from_columns(status=REACHED_HORIZON, t=t, u0=0.3 * e, linf=0.3 * e,
                                   s=1.5 - 0.5 * e, sdot=0.5 * e)


def blowup_traj(T, gamma, kmax=100):
    t = T - 10.0 ** (-np.arange(kmax + 1) / 10.0)
    u = (T - t) ** (-gamma)          # from the rounded t so the power law is exact
    return Trajectory.from_columns(status=BLOWUP_DETECTED, t=t, u0=u, linf=u, s=1.0 + 0 * t)


def slow_traj():
    t = np.geomspace(1.0, 1000.0, 200)
    return Trajectory.from_columns(status=REACHED_HORIZON, t=t, u0=t ** -0.25, linf=t ** -0.25,
                                   s=t ** 0.4)


def test_exponential_decay_golden():
    rep = classify(exp_decay_traj(), p=3.0)
    assert rep.verdict == EXPONENTIAL_DECAY
    assert rep.decay_rate == pytest.approx(1.0, abs=1e-6)
    assert rep.front_limit == pytest.approx(1.5, abs=1e-6)


def test_quarter_power_blowup_golden():
    rep = classify(blowup_traj(1.0, 0.25), p=3.0)
    assert rep.verdict == BLOW_UP
    assert rep.blowup_time_estimate == pytest.approx(1.0, abs=1e-6)
    assert rep.blowup_exponent == pytest.approx(0.25, abs=1e-6)


def test_half_power_blowup_golden():
    fit = estimate_blowup(blowup_traj(2.0, 0.5), p=2.0)
    assert fit.t_hat == pytest.approx(2.0, abs=1e-6)
    assert fit.gamma == pytest.approx(0.5, abs=1e-6)
    assert fit.ratio_to_bound == pytest.approx(1.0, abs=1e-5)
    assert fit.residual <= 1e-6
    assert fit.flags == ()


def test_blowup_fit_needs_enough_large_values():
    with pytest.raises(NotComputable):
        estimate_blowup(blowup_traj(1.0, 0.25, kmax=45), p=3.0)
    rep = classify(blowup_traj(1.0, 0.25, kmax=45), p=3.0)
    assert rep.verdict == BLOW_UP and rep.blowup_time_estimate is None
    assert any("not computable" in f for f in rep.flags)


def test_slow_decay_golden():
    traj = slow_traj()
    rep = classify(traj, p=3.0)
    assert rep.verdict == SLOW_DECAY
    assert rep.growth_exponent == pytest.approx(0.4, abs=1e-6)
    g = fit_growth_exponent(traj)
    assert math.isnan(g.front_flux_ratio)


def test_short_run_is_undetermined():
    t = np.linspace(0.0, 1.0, 10)
    rep = classify(Trajectory.from_columns(status=REACHED_HORIZON, t=t, u0=1.0, s=1.0), p=3.0)
    assert rep.verdict == UNDETERMINED
    assert rep.flags


def test_certificate_forces_exponential_decay():
    t = np.linspace(0.0, 1.0, 10)
    traj = Trajectory.from_columns(status=DECAY_CERTIFIED, t=t, u0=np.exp(-t), s=1.0)
    traj.certificate_time = 1.0
    rep = classify(traj, p=3.0)
    assert rep.verdict == EXPONENTIAL_DECAY
    assert rep.certificate_time == 1.0


def test_classification_survives_csv_round_trip(tmp_path):
    for traj in (exp_decay_traj(), slow_traj()):
        path = tmp_path / "t.csv"
        write_records_csv(traj, path)
        back = read_records_csv(path)
        back.status = traj.status
        assert classify(back, p=3.0) == classify(traj, p=3.0)


def step_predicate(threshold):
    return lambda lam: BLOW_UP if lam >= threshold else EXPONENTIAL_DECAY


def test_bisection_on_stub():
    bis = bisect_lambda(step_predicate(1.0), 0.05, 2.0, 1e-3)
    lo, hi = bis.bracket
    assert lo < 1.0 <= hi
    assert bis.width <= 1e-3
    assert not bis.flags


@given(st.floats(0.01, 0.99), st.floats(1e-6, 1e-2))
def test_bisection_brackets_any_threshold(c, tol):
    bis = bisect_lambda(step_predicate(c), 0.0, 1.0, tol)
    assert bis.bracket[0] < c <= bis.bracket[1]
    assert bis.width <= tol
    # halving: iterations = ceil(log2(1 / tol))
    assert len(bis.log) - 2 == math.ceil(math.log2(1.0 / tol))


def test_bad_brackets():
    with pytest.raises(BadBracketError):
        bisect_lambda(step_predicate(1.0), 1.5, 2.0, 1e-2)
    with pytest.raises(BadBracketError):
        bisect_lambda(step_predicate(1.0), 0.1, 0.5, 1e-2)
    with pytest.raises(BadBracketError):
        bisect_lambda(step_predicate(1.0), 2.0, 0.1, 1e-2)
    with pytest.raises(BadBracketError):
        bisect_lambda(step_predicate(1.0), 0.1, 2.0, 0.0)


def test_undetermined_midpoints_are_flagged():
    pred = lambda lam: BLOW_UP if lam >= 1.0 else (UNDETERMINED if lam > 0.5 else EXPONENTIAL_DECAY)
    bis = bisect_lambda(pred, 0.0, 2.0, 1e-2)
    assert bis.bracket[0] < 1.0 <= bis.bracket[1]
    assert any("horizon-too-short" in f for f in bis.flags)


def test_verdict_audit():
    lams = [0.3, 0.1, 0.2, 0.4]
    ok = verdict_audit(lams, [EXPONENTIAL_DECAY, EXPONENTIAL_DECAY, EXPONENTIAL_DECAY, BLOW_UP])
    assert ok == {"single_flip": True, "flips": 1, "violations": []}
    bad = verdict_audit(lams, [EXPONENTIAL_DECAY, BLOW_UP, EXPONENTIAL_DECAY, BLOW_UP])
    assert not bad["single_flip"]
    assert bad["violations"] == [0.2]


def test_lower_bracket():
    lams = [0.1, 0.2, 0.3, 0.4]
    lb = bracket_lambda_lower(lams, [EXPONENTIAL_DECAY, EXPONENTIAL_DECAY, SLOW_DECAY, BLOW_UP],
                              [True, True, False, False])
    assert (lb.certified_max, lb.slow_decay_min, lb.one_sided) == (0.2, 0.3, False)
    lb = bracket_lambda_lower(lams, [EXPONENTIAL_DECAY] * 3 + [BLOW_UP], [True, True, True, False])
    assert lb.one_sided and lb.slow_decay_min is None and lb.flags
    with pytest.raises(NotComputable):
        bracket_lambda_lower(lams, [BLOW_UP] * 4, [False] * 4)


def traj_with(profiles):
    traj = Trajectory(spec=None)
    for t, s, x, u in profiles:
        traj.checkpoints.append(Checkpoint(t, s, np.asarray(x), np.asarray(u), 0))
    return traj


X = np.linspace(0.0, 1.0, 11)


def test_compare_identical_runs():
    a = traj_with([(0.5, 1.0, X, 1 - X)])
    rep = compare_runs(a, a)
    assert rep.ok and rep.max_violation == 0.0 and rep.n_checkpoints == 1


def test_compare_detects_injected_violation():
    u = 1 - X
    bumped = u.copy()
    bumped[3] += 1e-3
    rep = compare_runs(traj_with([(0.5, 1.0, X, bumped)]), traj_with([(0.5, 1.0, X, u)]))
    assert not rep.ok
    assert rep.max_violation == pytest.approx(1e-3)
    assert rep.location == (0.5, X[3])


def test_compare_needs_common_checkpoints():
    with pytest.raises(NotComputable):
        compare_runs(traj_with([(0.5, 1.0, X, X)]), traj_with([(0.6, 1.0, X, X)]))
