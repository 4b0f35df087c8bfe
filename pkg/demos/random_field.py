"""
A classical complex field with the vacuum covariance
====================================================

Gaussian weights on momentum modes give a complex field whose covariance is
the cutoff vacuum kernel.  All of its moments are permanents of that kernel.
"""

import numpy as np

from spacetime_qi import randomfield as rf

spec = rf.LatticeSpec(n=16, spacing=1.0, m=1.0)
points = [(0, 0, 0), (1, 0, 0), (0, 2, 0)]
vals = rf.ensemble_values(spec, points, size=20_000, seed=5)

K = rf.lattice_kernel_matrix(spec, points, points)
print("lattice K(0)   :", K[0, 0].real)
print("continuum K(0) :", rf.cutoff_kernel(0.0, spec.m, spec.cutoff))

# Second moments match the kernel, fourth moments the 2x2 permanent.
for xs, ys in [([0], [1]), ([0, 1], [0, 2]), ([0, 0], [0, 0])]:
    est = rf.empirical_moment(vals, xs, ys)
    oracle = rf.permanent(K[np.ix_(xs, ys)])
    print(f"E xi{xs} xi*{ys}: {est.value.real:+.5f} +- {est.stderr:.1e}  (permanent {oracle.real:+.5f})")

# Without conjugates the circular field averages to zero.
pair = np.mean(vals[:, 0] * vals[:, 1])
print(f"E xi xi (no conjugate): {pair:.1e}")
