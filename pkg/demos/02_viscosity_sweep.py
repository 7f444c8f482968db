"""
Viscosity sweep on the reference cyclic-shear problem
=====================================================

The energy-type quantity (accumulated elastic and Cosserat rates plus the
scaled squared yield excess) should stay bounded as ``nu`` goes to zero,
while the largest yield excess itself decreases proportionally to ``nu``.
"""

import numpy as np

from afcosserat import quasistatic as qs

nus = [1e-1, 1e-2, 1e-3, 1e-4]
rows = qs.nu_sweep(qs.reference_scenario(n=16), nus)

print(f"{'nu':>8} {'estimate':>10} {'max excess':>12} {'max |b|':>9} {'stagger':>8}")
for nu, s in rows:
    print(f"{nu:8.0e} {s['estimate_quantity']:10.4f} {s['max_excess']:12.4e} "
          f"{s['max_backstress']:9.4f} {s['max_stagger_iters']:8d}")

q = np.array([s["estimate_quantity"] for _, s in rows])
exc = np.array([s["max_excess"] for _, s in rows])
print(f"estimate max/min ratio: {q.max() / q.min():.3f}")
print(f"log-log slope of the excess in nu: {np.polyfit(np.log(nus), np.log(exc), 1)[0]:.3f}")
