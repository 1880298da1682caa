import pytest
from hypothesis import given, strategies as st

from stefanlab.errors import InvalidSpecError
from stefanlab.mms import (cosine_mode, linear_decay, mms_error, spatial_convergence,
                           temporal_convergence)


@pytest.mark.parametrize("factory", [linear_decay, cosine_mode])
@given(t=st.floats(0.0, 2.0), x=st.floats(0.05, 0.95), s=st.floats(0.5, 2.0))
def test_manufactured_source_is_consistent(factory, t, x, s):
    # f = u_t - u_xx checked by central differences
    ms = factory(s=s)
    xx = x * s
    h, k = 1e-4, 1e-5
    ut = (ms.u(t + k, xx) - ms.u(t - k, xx)) / (2 * k)
    uxx = (ms.u(t, xx + h) - 2 * ms.u(t, xx) + ms.u(t, xx - h)) / h ** 2
    assert float(ms.source(t, xx)) == pytest.approx(float(ut - uxx), abs=1e-5)


@pytest.mark.parametrize("factory", [linear_decay, cosine_mode])
@given(t=st.floats(0.0, 2.0), s=st.floats(0.5, 2.0), p=st.floats(1.5, 4.0))
def test_manufactured_boundary_relations(factory, t, s, p):
    ms = factory(s=s, p=p)
    assert abs(float(ms.u(t, s))) <= 1e-15
    h = 1e-6
    ux0 = (-3 * ms.u(t, 0.0) + 4 * ms.u(t, h) - ms.u(t, 2 * h)) / (2 * h)
    assert -float(ux0) == pytest.approx(float(ms.u(t, 0.0)) ** p + ms.flux(t), abs=1e-6)


def test_linear_solution_error_is_purely_temporal():
    # a linear profile is reproduced exactly in space, so even a 4-cell grid
    # shows the clean dt^2 behaviour of the trapezoidal rule
    errs = [mms_error(linear_decay(), 4, dt, 0.5, theta=0.5) for dt in (0.05, 0.025, 0.0125)]
    assert errs[0] <= 0.05 ** 2
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(4.0, rel=0.02)


def test_temporal_orders():
    be = temporal_convergence(theta=1.0)
    cn = temporal_convergence(theta=0.5)
    assert min(be.orders) >= 0.9
    assert min(cn.orders) >= 1.8
    assert [r["order"] is None for r in be.rows()] == [True, False, False]


def test_spatial_order():
    tab = spatial_convergence()
    assert min(tab.orders) >= 1.9
    assert all(a > b for a, b in zip(tab.errors, tab.errors[1:]))


def test_fewer_than_three_levels_rejected():
    with pytest.raises(InvalidSpecError):
        temporal_convergence(levels=2)
    with pytest.raises(InvalidSpecError):
        spatial_convergence(levels=2)
