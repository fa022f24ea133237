"""
Relaxation of the moments
=========================

Integrate the closed moment equations from the vacuum and watch the
quadrature variances settle onto their steady-state values.
"""

import numpy as np

from cascadelaser import MomentState, SystemParams, evolve, steady_state_linear_solve, variances_from_moments

p = SystemParams(kappa=1.0, gain_A=10.0, eta=0.3, epsilon=2.0)
times = np.linspace(0.0, 20.0, 11)
traj = evolve(MomentState.vacuum(), p, 20.0, tol=1e-10, sample_times=times)
print(f"{traj.steps} accepted steps, {traj.rejected_steps} rejected, {traj.nfev} drift evaluations")

final = variances_from_moments(steady_state_linear_solve(p).state)
for t, s in traj:
    v = variances_from_moments(s)
    print(f"t={t:5.1f}  <a>={s.m_a.real:8.4f}  Var(c-)={v.dc_minus:.6f}  (steady {final.dc_minus:.6f})")

#%%
# The whole trajectory can be exported for plotting elsewhere.
print(traj.to_csv().splitlines()[0])
