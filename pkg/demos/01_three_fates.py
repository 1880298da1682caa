"""
Decay, blow-up and the energy test
==================================

Three amplitudes of the same ramp, run to a short horizon.
"""

from stefanlab import Numerics, ProblemSpec, LinearProfileSpec, run
from stefanlab.classifier import classify
from stefanlab.diagnostics import blowup_criterion

ramp = ProblemSpec(p=3.0, s0=1.0, profile=LinearProfileSpec(1.0), lam=1.0)

# the energy test is cheap: it needs only the initial data
for lam in (0.5, 0.9, 2.0):
    res = blowup_criterion(1.0, ramp.with_lambda(lam).initial_profile(), 3.0)
    print(f"lambda={lam}: E(0)={res.energy:+.4f}, threshold={res.threshold:.2e}, "
          f"predicts blow-up: {res.predicts_blowup}")

# the test is only sufficient: positive energy leaves the outcome open
for lam in (0.5, 0.9, 2.0):
    traj = run(ramp.with_lambda(lam), Numerics(t_end=20.0))
    rep = classify(traj)
    last = traj.records[-1]
    print(f"lambda={lam}: {traj.status} at t={traj.t_final:.4g}, verdict {rep.verdict}, "
          f"s={last.s:.4f}, u(t,0)={last.u0:.3e}")

# blow-up rate: u(t,0) ~ (T - t)^(-1/4) for p=3
traj = run(ramp.with_lambda(2.0), Numerics(t_end=1.0))
rep = classify(traj)
print(f"T_hat={rep.blowup_time_estimate:.6f}, gamma={rep.blowup_exponent:.4f}")
