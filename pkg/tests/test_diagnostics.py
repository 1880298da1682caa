import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stefanlab.diagnostics import (Checkpoint, DiagnosticsRecord, Trajectory, blowup_criterion,
                                   certificate_threshold, decay_certificate, energy,
                                   energy_identity_residual, energy_lower_bound,
                                   energy_monotonicity_violation, mass_balance_residual,
                                   nodal_gradient, profile_energy, rescaled_profile)
from stefanlab.errors import NotComputable
from stefanlab.model import LinearProfileSpec, ProblemSpec, make_initial_linear
from stefanlab.reference import decay_delta


def ramp_threshold(lam):
    # ||phi||_1 = lam / 2 on the unit interval
    l1 = lam / 2
    return math.pi ** 2 / 256 * l1 ** 3 / (1 + l1) ** 4


def test_ramp_energy_and_prediction():
    res = blowup_criterion(1.0, make_initial_linear(1.0, 2.0), 3.0)
    assert res.energy == pytest.approx(-2.0, rel=1e-14)    # 4/2 - 16/4
    assert res.threshold == pytest.approx(math.pi ** 2 / 4096, rel=1e-14)
    assert res.threshold == pytest.approx(2.4095e-3, rel=1e-4)
    assert res.predicts_blowup and res.advisory


def test_small_ramp_not_predicted():
    res = blowup_criterion(1.0, make_initial_linear(1.0, 0.5), 3.0)
    assert res.energy == pytest.approx(0.125 - 0.015625, rel=1e-14)
    assert res.threshold == pytest.approx(ramp_threshold(0.5), rel=1e-14)
    assert not res.predicts_blowup
    assert res.margin < 0


@given(st.floats(0.05, 5.0), st.floats(1.2, 6.0))
def test_profile_energy_of_ramp(lam, p):
    E = profile_energy(make_initial_linear(1.0, lam), p)
    assert E == pytest.approx(lam ** 2 / 2 - lam ** (p + 1) / (p + 1), rel=1e-12, abs=1e-14)


@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=30), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_nodal_gradient_exact_for_quadratics(widths, a, b, c):
    x = np.concatenate([[0.0], np.cumsum(widths)])
    g = nodal_gradient(x, a + b * x + c * x ** 2)
    scale = 1 + abs(b) + abs(c) * x[-1]
    assert np.allclose(g, b + 2 * c * x, atol=1e-9 * scale * x[-1] / min(widths))


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=30), st.floats(0.1, 3.0))
def test_sampled_energy_of_linear_profile(widths, lam):
    x = np.concatenate([[0.0], np.cumsum(widths)])
    L = x[-1]
    u = lam * (L - x)
    assert energy(x, u, 3.0) == pytest.approx(lam ** 2 * L / 2 - (lam * L) ** 4 / 4, rel=1e-9, abs=1e-12)


def record(t=0.0, s=1.0, linf=1.0, l1=1.0, u0=1.0, energy=0.0):
    return DiagnosticsRecord(t, s, 0.0, u0, linf, l1, energy, 0.0, 0)


def test_energy_lower_bound_values():
    assert energy_lower_bound(record(l1=1.0, s=1.0)) == pytest.approx(math.pi ** 2 / 4096)
    assert energy_lower_bound(record(l1=2.0, s=2.0)) == pytest.approx(math.pi ** 2 / 256 * 8 / 256)
    assert energy_lower_bound(record(l1=0.0)) == 0.0


def test_certificate_threshold_scaling():
    d = decay_delta(3.0)
    assert certificate_threshold(1.0, 3.0) == d
    assert certificate_threshold(0.5, 3.0) == d            # min with 1
    assert certificate_threshold(16.0, 3.0) == pytest.approx(d / 4)
    assert decay_certificate(record(s=16.0, linf=0.99 * d / 4), 3.0)
    assert not decay_certificate(record(s=16.0, linf=1.01 * d / 4), 3.0)


SPEC = ProblemSpec(3.0, 1.0, LinearProfileSpec(1.0))


def synthetic(c=0.5, slope=0.5, n=11):
    # constant u0 = c feeds c^3 t; the front absorbs slope * t of it
    t = np.linspace(0.0, 1.0, n)
    return Trajectory.from_columns(spec=SPEC, t=t, u0=c, s=1 + slope * t, l1=0.5 + (c ** 3 - slope) * t)


def test_mass_residual_exact_balance():
    traj = synthetic()
    assert max(mass_balance_residual(traj, k) for k in range(len(traj))) <= 1e-15


def test_mass_residual_detects_imbalance():
    t = np.linspace(0.0, 1.0, 11)
    traj = Trajectory.from_columns(spec=SPEC, t=t, u0=0.5, s=1.0, l1=0.5)
    assert mass_balance_residual(traj, 10) == pytest.approx(0.125)


def test_mass_residual_prefers_accumulated_integral():
    traj = Trajectory(spec=None)
    traj.append(record(t=0.0, l1=1.0), flux=0.0, diss=0.0, cubic=0.0)
    traj.append(record(t=1.0, l1=1.5), flux=0.5, diss=0.0, cubic=0.0)
    assert mass_balance_residual(traj, 1) == 0.0


def test_not_computable_cases():
    traj = Trajectory.from_columns(t=[0.0, 1.0])
    with pytest.raises(NotComputable):
        mass_balance_residual(traj, 1)
    with pytest.raises(NotComputable):
        energy_identity_residual(traj, 0, 1)
    with pytest.raises(NotComputable):
        traj.checkpoint_at(0.5)
    with pytest.raises(NotComputable):
        traj.column("dissipation")
    with pytest.raises(IndexError):
        mass_balance_residual(traj, 5)


def test_energy_identity_on_consistent_data():
    # E drops by dissipation + half the cubic front term
    traj = Trajectory(spec=None)
    traj.append(record(t=0.0, energy=1.0), flux=0, diss=0.0, cubic=0.0)
    traj.append(record(t=1.0, energy=0.7), flux=0, diss=0.2, cubic=0.2)
    assert energy_identity_residual(traj, 0, 1) == pytest.approx(0.0, abs=1e-15)
    assert energy_identity_residual(traj, 1, 1) == 0.0


def test_append_rejects_time_reversal():
    traj = Trajectory.from_columns(t=[0.0, 1.0])
    with pytest.raises(ValueError):
        traj.append(record(t=1.0))


def test_from_columns_defaults():
    traj = Trajectory.from_columns(t=[0.0, 0.5], s=[1.0, 2.0])
    assert traj.column("s").tolist() == [1.0, 2.0]
    assert traj.column("u0").tolist() == [0.0, 0.0]
    assert traj.t_final == 0.5


def test_monotonicity_violation():
    traj = Trajectory.from_columns(t=[0, 1, 2, 3], energy=[3.0, 2.0, 2.5, 1.0])
    assert energy_monotonicity_violation(traj) == 0.5
    assert energy_monotonicity_violation(traj, t_from=2.0) == 0.0


@given(st.floats(1.0, 100.0), st.floats(1.5, 5.0))
def test_rescaled_profile(M, p):
    x = np.linspace(0.0, 2.0, 21)
    u = M * np.exp(-x)
    traj = Trajectory.from_columns(t=[0.0, 1.0], u0=[1.0, M])
    traj.checkpoints.append(Checkpoint(1.0, 2.0, x, u, 1))
    y, w, ev = rescaled_profile(traj, 1.0, p=p)
    lam = M ** (-(p - 1))
    assert np.allclose(y, x / lam)
    assert np.allclose(w, u / M)
    assert w[0] == pytest.approx(1.0)
    assert ev(y[3]) == pytest.approx(w[3])
    assert ev(10 * y[-1]) == 0.0
