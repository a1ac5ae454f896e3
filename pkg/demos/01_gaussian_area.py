"""Gaussian area of the model shrinkers, mesh against closed form.

A generalized cylinder S^k_{sqrt(2k)} x R^{n-k} has
F = (4 pi)^{-k/2} |S^k| (2k)^{k/2} e^{-k/2}, independent of n - k.
The meshes use curved quadrature, so the error is set by quadrature order
and by the truncation radius R.
"""

from math import sqrt

import numpy as np

from shrinkerlab import CatalogPiece, GeneralizedCylinder, build_mesh, gaussian_area, sphere_area


def closed_form(k):
    if k == 0:
        return 1.0
    r = sqrt(2 * k)
    return (4 * np.pi) ** (-k / 2) * sphere_area(k) * r ** k * np.exp(-r * r / 4)


print("analytic pieces, R = 30")
print(f"{'n':>2} {'k':>2} {'label':>9} {'F':>14} {'closed form':>14}")
for n in range(1, 5):
    for k in range(n + 1):
        shape = GeneralizedCylinder(n, k)
        F = gaussian_area(CatalogPiece(shape, 30.0))
        print(f"{n:>2} {k:>2} {shape.label:>9} {F:14.10f} {closed_form(k):14.10f}")

print("\nmeshes of the shrinker circle and sphere, R = 3")
for n in (1, 2):
    shape = GeneralizedCylinder(n, n)
    for h in (0.2, 0.1, 0.05):
        m = build_mesh(shape, 3.0, h)
        flat = gaussian_area(m, order=2, curved=False)
        curved = gaussian_area(m, order=2)
        print(f"n={n} h={h:<5} vertices={m.num_vertices:>6} flat err={abs(flat - closed_form(n)):.2e} "
              f"curved err={abs(curved - closed_form(n)):.2e}")

print("\nplanes through the origin, mesh truncated at R = 12")
for n in (1, 2):
    F = gaussian_area(build_mesh(GeneralizedCylinder(n, 0), 12.0, 0.05), order=2)
    print(f"n={n} F = {F:.12f}")
