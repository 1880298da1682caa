"""
Locating the blow-up threshold
==============================

Scan amplitudes, then bisect the flip from decay to blow-up.
"""

import numpy as np
from stefanlab import Numerics, ProblemSpec, LinearProfileSpec
from stefanlab.classifier import bisect_lambda_runs, evaluate_many, verdict_audit

ramp = ProblemSpec(p=3.0, s0=1.0, profile=LinearProfileSpec(1.0))
num = Numerics(t_end=50.0)

lams = np.linspace(0.2, 1.6, 8)
scan = evaluate_many(ramp, lams, num)
for lam, verdict, rep, status in scan:
    print(f"{lam:.2f}  {verdict:17s} {status}")
print(verdict_audit(lams, [v for _, v, _, _ in scan]))

bis, reports = bisect_lambda_runs(ramp, 0.05, 2.0, 1e-3, num)
print("bracket", bis.bracket, "after", len(bis.log), "runs")

# just below the bracket the run still decays exponentially;
# the front settles instead of growing like t^beta
rep, status = reports[bis.bracket[0]]
print(bis.bracket[0], rep.verdict, "front limit", rep.front_limit)
