"""
Clustering of polynomial field states
=====================================

Wick's theorem evaluates ``<psi|A B|psi>`` for states made by polynomials in
smeared fields.  Translating ``A`` away from ``B`` makes the connected part
``omega(A(l) B) - omega(A(l)) omega(B)`` vanish.
"""

from spacetime_qi import wick as wk

m = 1.0
u = wk.OnShellAmplitude(width=1.0)
v = wk.OnShellAmplitude(center=(0.5, 0.0, 0.0), width=1.0)

# Sanity: a normalised packet has unit pairing and the counts are (n-1)!!.
print("C(u, u) =", wk.contraction(u, u, m))
print("pairings of 8 factors:", wk.count_pairings(8))

state = wk.PolynomialState(wk.FieldMonomial([u]), m)
A = wk.FieldMonomial([u, u])
B = wk.FieldMonomial([v, v])

rows = wk.cluster_scan(state, A, B, [0.0, 1.0, 2.0, 4.0, 6.0, 8.0])
print(f"\n{'l':>5} {'gap':>12} {'omega(A(l))':>14} {'<0|A(l)|0>':>12}")
for row in rows:
    print(f"{row['l']:5.1f} {row['gap']:12.3e} {row['omega_A'].real:14.6f} {row['vacuum_A'].real:12.6f}")
