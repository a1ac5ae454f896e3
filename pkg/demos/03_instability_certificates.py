"""Instability certificates and the radius R*(n, k) at which they fire.

The test field eta(|x|) = clip(r2 - |x|, 0, 1) violates the weighted
Poincare inequality  int w^2 e <= 2 int |grad w|^2 e  once mass exceeds twice
the energy.  Stability forces that inequality, so a firing certificate
proves the piece unstable.
"""

from math import sqrt

from shrinkerlab import CatalogPiece, GeneralizedCylinder, build_mesh, certify_instability, estimate_Rn

line = GeneralizedCylinder(1, 0)
print("the line, r1 = sqrt 6")
for r2 in (3.5, 4.0, 5.0):
    c = certify_instability(CatalogPiece(line, r2), sqrt(6), r2)
    m = certify_instability(build_mesh(line, r2, 0.01), sqrt(6), r2)
    print(f"r2={r2}: mass {c.mass:.5f} energy {c.energy:.5f} margin {c.margin:.5f} ({c.verdict}); "
          f"mesh h=0.01 margin {m.margin:.5f}")

print("\nfirst firing grid radius (step 0.25) per shape")
for n in range(1, 6):
    est = estimate_Rn(n)
    row = "  ".join(f"k={k}: {v}" for k, v in est.Rstar.items())
    print(f"n={n}: {row}   R_n estimate {est.value}")

print("\nvolume comparison at the firing pairs: e^{-r1^2/4} V(r1) against 4 e^{-(r2-1)^2/4} V(r2)")
for n in (1, 2, 3):
    for k, r2 in estimate_Rn(n).Rstar.items():
        c = certify_instability(CatalogPiece(GeneralizedCylinder(n, k), r2), sqrt(4 + 2 * n), r2)
        d = c.contradiction
        print(f"n={n} k={k} r2={r2}: lhs {d['lhs']:8.4f} rhs {d['rhs']:8.4f} lhs > rhs: {d['fails']}")
