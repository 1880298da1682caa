"""
Self-similar front under a fixed boundary temperature
=====================================================

With u(t,0)=u0 the front grows like A sqrt(t).
"""

import numpy as np
from stefanlab import DirichletConstant, Numerics, ProblemSpec, SampledProfileSpec, run
from stefanlab.reference import dirichlet_similarity_profile, neumann_similarity_A

u0, s0 = 1.0, 0.1
A = neumann_similarity_A(u0).A
print("A =", A)

# start on the similarity profile, so t_off aligns the clocks
t_off = (s0 / A) ** 2
x = np.linspace(0.0, s0, 401)
phi = dirichlet_similarity_profile(u0, t_off, x, A)
phi[-1] = 0.0
spec = ProblemSpec(3.0, s0, SampledProfileSpec(tuple(x), tuple(phi)), 1.0, DirichletConstant(u0))

traj = run(spec, Numerics(t_end=0.2))
t, s = traj.column("t"), traj.column("s")
for k in np.linspace(1, len(t) - 1, 6).astype(int):
    print(f"t={t[k]:.4f}  s/sqrt(t+t_off)={s[k] / np.sqrt(t[k] + t_off):.8f}")

# small u0: A ~ sqrt(2 u0)
for v in (1e-2, 5e-3, 1e-3):
    print(v, neumann_similarity_A(v).A, np.sqrt(2 * v))
