"""Volume growth and the divergence identity on the shrinker cylinder.

On a shrinker <H, x> = -2 |H|^2, so div_Sigma x^T = n - 2 |H|^2.
Integrating over B_r gives 2n V(r) - 4 T(r) = 2 int_{dB_r} |x^T|, where
T(r) is the integral of |H|^2.
The left side is computed by exact ball clipping of the mesh, the right
side by slicing it with the sphere of radius r.
"""

from math import sqrt

import numpy as np

from shrinkerlab import (
    CatalogPiece,
    GeneralizedCylinder,
    build_mesh,
    check_volume_growth,
    divergence_identity_check,
    growth_profile,
)

shape = GeneralizedCylinder(2, 1)
print("divergence identity at r = 3 on S^1_sqrt2 x R, R = 4")
prev = None
for h in (0.2, 0.1, 0.05, 0.025):
    chk = divergence_identity_check(build_mesh(shape, 4.0, h), 3.0)
    rate = "" if prev is None else f"  ratio {prev / chk.residual:.2f}"
    print(f"h={h:<6} residual {chk.residual:.3e}{rate}")
    prev = chk.residual

print("\nvolume growth slack V(r1)/r1^n - (1 - 2n/r2^2) V(r2)/r2^n on analytic pieces")
for n in (1, 2, 3):
    r1 = sqrt(4 + 2 * n)
    grid = np.r_[r1, np.arange(4.0, 10.01, 1.0)]
    for k in range(n + 1):
        prof = growth_profile(CatalogPiece(GeneralizedCylinder(n, k), 10.0), grid)
        slack = min(check_volume_growth(prof, a, b).value for a in grid for b in grid if b > a)
        ratio = prof.T[-1] / prof.V[-1]
        print(f"n={n} k={k}: min slack {slack:8.4f}   T/V at r=10: {ratio:.3f} (bound n/2 = {n / 2})")
