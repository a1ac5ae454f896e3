"""Two shrinker curves in B_4 always meet; a non-shrinker pair shows what the proof does otherwise.

For the circle of radius sqrt 2 and eight lines through the origin every
pair intersects.  The circle with a concentric circle of radius 1.9 is
disjoint: minimizing F in the annulus between them pushes the curve onto
the outer circle, and the instability certificate fires on the result.
"""

import time

import numpy as np

from shrinkerlab import GeneralizedCylinder, build_mesh, frankel_verdict

R = 4.0
curves = {"circle": build_mesh(GeneralizedCylinder(1, 1), R, 0.1)}
for j in range(8):
    t = np.pi * j / 8
    Q = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    curves[f"line {j}pi/8"] = build_mesh(GeneralizedCylinder(1, 0, rotation=Q), R, 0.1)

t0 = time.time()
names = list(curves)
for i, a in enumerate(names):
    for b in names[i + 1:]:
        v = frankel_verdict(curves[a], curves[b], R)
        p = v.witnesses[0][2]
        print(f"{a:>12} x {b:<12} {v.verdict:<10} witnesses {len(v.witnesses):>3}, first at |p| = {np.linalg.norm(p):.3f}")
print(f"sweep took {time.time() - t0:.2f} s")

print("\nthe disjoint test double")
for h in (0.1, 0.05):
    v = frankel_verdict(build_mesh(GeneralizedCylinder(1, 1), R, h),
                        build_mesh(GeneralizedCylinder(1, 1, radius=1.9), R, h), R)
    m = v.minimizer
    ref = (4 * np.pi) ** -0.5 * 2 * np.pi * 1.9 * np.exp(-1.9 ** 2 / 4)
    print(f"h={h}: {v.verdict}; F {m.F_initial:.6f} -> {m.F:.6f} (outer circle {ref:.6f}) "
          f"in {m.iterations} steps, converged {m.converged}, monotone {m.monotone()}, "
          f"contacts on the outer circle {int(m.contact[:, 1].sum())}, certificate margin "
          f"{v.certificate.margin:.4f}")
