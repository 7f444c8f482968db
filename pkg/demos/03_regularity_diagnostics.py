"""
Regularity diagnostics of a plastic displacement field
======================================================

Runs the reference scenario on a 32x32 grid and inspects the final
displacement: empirical Hoelder exponents away from and near the boundary,
hole-filling ratios at an interior point, a temporal exponent at a few
probes, and the growth of the velocity energy in clipped boundary balls.
"""

import numpy as np

from afcosserat import quasistatic as qs
from afcosserat import regularity_lab as rl

traj = qs.run(qs.reference_scenario(n=32))
mesh, uT = traj.mesh, traj[-1].u
print(f"{len(traj) - 1} steps, max stagger iterations {max(s.stagger_iters for s in traj.states)}")

# %% spatial Hoelder exponents
for anchors in ("interior", "boundary", "all"):
    rep = rl.holder_space(mesh, uT, sample_pairs=1000, seed=0, anchors=anchors)
    print(f"holder_space[{anchors:8s}] alpha = {rep.alpha:.3f}  "
          f"(2-sigma span {rep.span[0]:.2f}..{rep.span[1]:.2f})")

# %% hole filling at the center
dens = rl.energy_density(mesh, uT)
for R in (0.2, 0.15, 0.1):
    r = rl.hole_filling_ratio(mesh, None, (0.5, 0.5), R, density=dens)
    print(f"hole-filling ratio at R = {R:.2f}: {r.value:.3f}")

# %% temporal exponent
probes = [(0.5, 0.5), (0.5, 0.05), (0.05, 0.5)]
alpha = rl.holder_space(mesh, uT, anchors="interior").alpha
rep = rl.holder_time(traj, probes, alpha_space=alpha)
print(f"holder_time slope {rep.slope:.3f}, lower bound from the spatial exponent {rep.predicted:.3f}")

# %% boundary growth of the velocity energy
reps = rl.boundary_growth(mesh, traj, None, [(0.5, 0.0), (0.0, 0.5)], [0.4, 0.2, 0.1])
for rep in reps:
    e = np.array2string(rep.energies, formatter={"float_kind": "{:.2e}".format})
    print(f"center {rep.center}: energies {e}, exponent {rep.exponent:.2f}, "
          f"lift exponent {rep.lift_exponent:.2f}")
