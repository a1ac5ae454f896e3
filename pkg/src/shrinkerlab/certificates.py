"""Explicit test functions certifying Gaussian instability of large shrinker pieces.

The test field is ``w = eta(|x|) phi`` with the radial ramp
``eta = clip(r2 - |x|, 0, 1)`` and an optional cutoff ``phi`` near a
singular set.  Since ``|A|^2 >= 0`` drops out of the quadratic form only with
a favourable sign, ``Q(w) <= int |grad w|^2 e - (1/2) int w^2 e``, and the
certificate fires when ``mass - 2 energy > 0`` with

    mass   = int w^2 e^{-|x|^2/4},
    energy = int |grad w|^2 e^{-|x|^2/4}.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import exp, sqrt

import numpy as np

from .catalog import CatalogPiece, GeneralizedCylinder
from .errors import NoFiringRadiusError, PreconditionError, RadiusOutOfDomainError
from .functional import weighted_forms
from .growth import CutoffFunction, SingularSetProxy, build_cutoff, cutoff_energy, growth_profile
from .mesh import DiscreteHypersurface

__all__ = [
    "radial_cutoff",
    "InstabilityCertificate",
    "certify_instability",
    "RnEstimate",
    "estimate_Rn",
]


def radial_cutoff(surface, r2):
    """``eta(|x|) = clip(r2 - |x|, 0, 1)``: one on ``B_{r2-1}``, zero outside ``B_{r2}``.

    ``surface`` may be a mesh (vertex values are returned), an array of
    points, or an analytic piece (a callable of the radius is returned).

    Raises
    ------
    RadiusOutOfDomainError
        If ``r2 <= 1`` or ``r2`` exceeds the construction radius.
    """
    if r2 <= 1:
        raise RadiusOutOfDomainError(f"r2 = {r2} must exceed 1")
    R = getattr(surface, "R", None)
    if R is not None and r2 > R + 1e-12:
        raise RadiusOutOfDomainError(f"r2 = {r2} exceeds the construction radius {R}")
    if isinstance(surface, CatalogPiece):
        return lambda rad: np.clip(r2 - np.asarray(rad, dtype=float), 0.0, 1.0)
    x = surface.vertices if isinstance(surface, DiscreteHypersurface) else np.atleast_2d(surface)
    return np.clip(r2 - np.linalg.norm(x, axis=1), 0.0, 1.0)


@dataclass
class InstabilityCertificate:
    r1: float
    r2: float
    mass: float
    energy: float
    rho: float | None = None
    eps: float | None = None
    cutoff_dirichlet: float = 0.0
    contradiction: dict = field(default_factory=dict)
    field_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def margin(self):
        return self.mass - 2.0 * self.energy

    @property
    def fires(self):
        return bool(self.margin > 0)

    @property
    def verdict(self):
        return "fires" if self.fires else "inconclusive"

    def to_json(self):
        return {
            "r1": self.r1,
            "r2": self.r2,
            "rho": self.rho,
            "eps": self.eps,
            "mass": self.mass,
            "energy": self.energy,
            "margin": self.margin,
            "cutoff_dirichlet": self.cutoff_dirichlet,
            "cutoff_within_eps": None if self.eps is None else bool(self.cutoff_dirichlet <= self.eps),
            "verdict": self.verdict,
            "contradiction": self.contradiction,
        }


def _contradiction(surface, r1, r2):
    """``e^{-r1^2/4} V(r1)`` against ``4 e^{-(r2-1)^2/4} V(r2)``."""
    prof = growth_profile(surface, [r1, r2])
    lhs = exp(-r1 * r1 / 4.0) * prof.V[0]
    rhs = 4.0 * exp(-(r2 - 1.0) ** 2 / 4.0) * prof.V[1]
    return {"lhs": float(lhs), "rhs": float(rhs), "fails": bool(lhs > rhs)}


def certify_instability(surface, r1, r2, S: SingularSetProxy | None = None, eps=None,
                        forms=None) -> InstabilityCertificate:
    """Evaluate the test field ``eta phi`` on ``B_{r2}`` intersected with ``surface``.

    Parameters
    ----------
    surface : DiscreteHypersurface or CatalogPiece
    r1 : float
        Inner radius; at least ``sqrt(4 + 2n)``.
    r2 : float
        Outer radius; ``r2 > r1 + 1`` and ``r2 <= R``.
    S : SingularSetProxy, optional
        Points to cut out; an empty or missing proxy means ``phi = 1``.
    eps : float, optional
        Budget for the cutoff Dirichlet energy, recorded and compared.
    """
    n = surface.n
    if r1 < sqrt(4 + 2 * n) - 1e-12:
        raise PreconditionError(f"r1 = {r1} is below sqrt(4 + 2n) = {sqrt(4 + 2 * n):.6f}")
    if not r2 > r1 + 1 + 1e-12:
        raise PreconditionError(f"need r2 > r1 + 1, got r1 = {r1}, r2 = {r2}")
    if surface.R is not None and r2 > surface.R + 1e-12:
        raise RadiusOutOfDomainError(f"r2 = {r2} exceeds the construction radius {surface.R}")
    has_S = S is not None and len(S.points) > 0
    contra = _contradiction(surface, r1, r2)

    if isinstance(surface, CatalogPiece):
        mass = surface.radial_integral(lambda rad, t: np.clip(r2 - rad, 0, 1) ** 2 * np.exp(-rad * rad / 4),
                                       rmax=r2, breaks=(r2 - 1,))
        # |grad eta| = |eta'| |x^T| / |x| with |x^T| = t on a centred cylinder
        energy = surface.radial_integral(
            lambda rad, t: np.where(rad > r2 - 1, 1.0, 0.0) * (t / rad) ** 2 * np.exp(-rad * rad / 4),
            rmax=r2, breaks=(r2 - 1,))
        cut_D = 0.0
        if has_S:
            build_cutoff(surface, S)
            inner = np.linalg.norm(S.points, axis=1) <= r2 - 1 - 2 * S.rho
            if not np.all(inner):
                raise PreconditionError("analytic certificates need the 2 rho balls inside B_{r2-1}")
            cut_D, deficiency = cutoff_energy(surface, CutoffFunction(S))
            mass -= deficiency
            energy += cut_D
        return InstabilityCertificate(float(r1), float(r2), float(mass), float(energy), S.rho if has_S else None,
                                      eps, float(cut_D), contra)

    forms = weighted_forms(surface) if forms is None else forms
    w = radial_cutoff(surface, r2)
    cut_D = 0.0
    if has_S:
        phi = build_cutoff(surface, S)
        cut_D = forms.dirichlet(phi.values, phi.values)
        w = w * phi.values
    w[surface.boundary_vertices] = 0.0
    mass = forms.inner(w, w)
    energy = forms.dirichlet(w, w)
    return InstabilityCertificate(float(r1), float(r2), float(mass), float(energy), S.rho if has_S else None,
                                  eps, float(cut_D), contra, w)


@dataclass
class RnEstimate:
    n: int
    step: float
    cap: float
    r1: float
    Rstar: dict
    rows: list

    @property
    def value(self):
        """Largest ``R*(n, k)`` over ``k``; ``nan`` when some shape never fires."""
        vals = list(self.Rstar.values())
        if any(np.isnan(v) for v in vals):
            return float("nan")
        return float(max(vals))

    def to_csv(self, config=None):
        buf = io.StringIO()
        if config is not None:
            buf.write("# " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "k", "Rstar", "r1", "r2", "mass", "energy", "margin"])
        for row in self.rows:
            w.writerow([row["n"], row["k"], f"{row['Rstar']:.17g}", f"{row['r1']:.17g}",
                        f"{row['r2']:.17g}", f"{row['mass']:.17g}", f"{row['energy']:.17g}",
                        f"{row['margin']:.17g}"])
        return buf.getvalue()


def estimate_Rn(n, step=0.25, cap=20.0, strict=False, nodes=200) -> RnEstimate:
    """Smallest grid radius ``R`` with a firing certificate on every catalog cylinder.

    For each ``k = 0..n`` the outer radius runs over the grid ``step * j``
    above ``r1 + 1`` with ``r1 = sqrt(4 + 2n)``; the first firing grid radius
    is ``R*(n, k)``.  Shapes that never fire below ``cap`` get ``nan`` (or
    raise with ``strict=True``).
    """
    if not 0 < step <= 0.25:
        raise ValueError("grid step must lie in (0, 0.25]")
    r1 = sqrt(4 + 2 * n)
    j0 = int(np.floor((r1 + 1) / step + 1e-9)) + 1
    grid = [step * j for j in range(j0, int(np.floor(cap / step + 1e-9)) + 1)]
    Rstar, rows = {}, []
    for k in range(n + 1):
        shape = GeneralizedCylinder(n, k)
        Rstar[k] = float("nan")
        for r2 in grid:
            cert = certify_instability(CatalogPiece(shape, r2, nodes=nodes), r1, r2)
            if cert.fires:
                Rstar[k] = r2
                rows.append({"n": n, "k": k, "Rstar": r2, "r1": r1, "r2": r2, "mass": cert.mass,
                             "energy": cert.energy, "margin": cert.margin})
                break
        else:
            if strict:
                raise NoFiringRadiusError(f"{shape.label} does not fire below cap {cap}")
            rows.append({"n": n, "k": k, "Rstar": float("nan"), "r1": r1, "r2": float("nan"),
                         "mass": float("nan"), "energy": float("nan"), "margin": float("nan")})
    return RnEstimate(n, step, cap, r1, Rstar, rows)
