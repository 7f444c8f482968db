"""
Single-element hardening response
=================================

One triangle pair under a monotone uniaxial strain ramp. With ``d = 0`` the
backstress grows linearly with the plastic strain; with ``d > 0`` it
saturates at ``c/d``. The viscous parameter ``nu`` lets the stress overshoot
the yield surface, so the plastic strain lags behind the rate-independent
limit by an amount proportional to ``nu``.
"""

import numpy as np

from afcosserat import quasistatic as qs
from afcosserat import tensor3 as t3

N = np.diag([2.0, -1.0, -1.0]) / np.sqrt(6.0)  # flow direction of the ramp
ramp = qs.LinearRamp([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]], rate=0.05 / np.sqrt(2 / 3))


def response(d, nu, steps=400):
    p = qs.reference_material(nu, d=d)
    traj = qs.run(qs.Scenario(p, 1, 1, 1.0, steps, ramp))
    ep = np.array([t3.inner(s.eps_p[0], N) for s in traj.states])
    b = np.array([t3.inner(s.b[0], N) for s in traj.states])
    return traj.times, ep, b, p


# %% linear versus saturating hardening
print(f"{'t':>6} {'p (d=0)':>12} {'b (d=0)':>10} {'p (d=50)':>12} {'b (d=50)':>10}")
t, p0, b0, _ = response(0.0, 1e-3)
_, p1, b1, mat = response(50.0, 1e-3)
for k in range(0, len(t), 50):
    print(f"{t[k]:6.3f} {p0[k]:12.4e} {b0[k]:10.4f} {p1[k]:12.4e} {b1[k]:10.4f}")
print(f"saturation bound c/d = {mat.backstress_bound:g}, reached {b1.max():.6f}")

# %% plastic strain lags behind the rate-independent limit
t, p_ref, _, _ = response(50.0, 1e-5)
k = np.searchsorted(t, 0.2)
for nu in (1e-1, 1e-2, 1e-3):
    _, p, _, _ = response(50.0, nu)
    lag = p_ref[k] - p[k]
    print(f"nu = {nu:g}: p(0.2) = {p[k]:.6e}, lag {lag:.3e}, lag / nu = {lag / nu:.3e}")
