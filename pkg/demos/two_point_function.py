"""
Vacuum two-point function at spacelike separation
==================================================

The equal-time vacuum correlation of a free scalar field of mass ``m`` has a
Bessel closed form.  Here it is compared with a direct momentum integral and
with the leading large-distance formula.
"""

import numpy as np

from spacetime_qi import fieldkernel as fk

m = 1.0
radii = np.array([0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0])

# Closed form against the independent quadrature.
print(f"{'r':>6} {'closed':>14} {'quadrature':>14} {'rel. diff':>10}")
for r in radii:
    c = fk.wightman_closed(r, m).value
    q = fk.wightman_quadrature(r, m).value
    print(f"{r:6.1f} {c:14.6e} {q:14.6e} {abs(q - c) / c:10.1e}")

# The tail falls like exp(-m r) / r**1.5, so this combination levels off.
print("\nlog W + m r + 1.5 log r:")
for r in (10.0, 20.0, 40.0):
    w = fk.wightman_closed(r, m).value
    print(f"  r = {r:4.0f}: {np.log(w) + m * r + 1.5 * np.log(r):.4f}")

# The printed asymptotic prefactor is off by pi; the ratio settles at 1/pi.
print("\nclosed / asymptotic:")
for lam in (1.0, 10.0, 100.0):
    print(f"  m r = {lam:5.0f}: {fk.asymptotic_ratio(lam, m):.5f}")
print(f"  1/pi      : {1 / np.pi:.5f}")
