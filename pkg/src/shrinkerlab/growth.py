"""Volume growth of shrinker pieces in balls and the cutoff functions near singular sets.

``V(r)`` is the n-volume of ``B_r`` intersected with the surface and ``T(r)``
the integral of ``|H|^2`` over the same set.  On meshes both use exact
ball clipping of every simplex (segment/ball lengths, triangle/disk areas),
so the profile carries no staircase error from indicator quadrature.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import pi, sqrt

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import roots_jacobi

from .catalog import CatalogPiece, catalog_differential_data, sphere_area
from .errors import (
    NonRegularRadiusError,
    PreconditionError,
    RadiusOutOfDomainError,
    RhoTooLargeError,
    UnsupportedDimensionError,
)
from .functional import gaussian_weight, weighted_forms
from .geometry import (
    segment_ball_length,
    segment_sphere_points,
    triangle_ball_area,
    triangle_sphere_arcs,
)
from .mesh import DiscreteHypersurface, surface_data

__all__ = [
    "GrowthProfile",
    "growth_profile",
    "check_volume_growth",
    "check_H2_bound",
    "divergence_identity_check",
    "coarea_volume",
    "critical_radii",
    "SingularSetProxy",
    "CutoffFunction",
    "build_cutoff",
    "cutoff_energy",
]


@dataclass
class GrowthProfile:
    n: int
    radii: np.ndarray
    V: np.ndarray
    T: np.ndarray
    regular: np.ndarray

    def at(self, r):
        idx = np.where(np.isclose(self.radii, r, rtol=0, atol=1e-12))[0]
        if len(idx) == 0:
            raise ValueError(f"radius {r} is not on the profile grid")
        return int(idx[0])

    def to_csv(self, config=None):
        buf = io.StringIO()
        if config is not None:
            buf.write("# " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "V", "T", "regular"])
        for r, V, T, reg in zip(self.radii, self.V, self.T, self.regular):
            w.writerow([f"{r:.17g}", f"{V:.17g}", f"{T:.17g}", int(bool(reg))])
        return buf.getvalue()


def _clip_measure(mesh, r):
    P = mesh.vertices[mesh.simplices]
    if mesh.n == 1:
        return segment_ball_length(P[:, 0], P[:, 1], r)
    return triangle_ball_area(P, r)


def _element_H2(mesh, estimated=False):
    """Mean of |H|^2 on each simplex (exact at projected centroids on catalog meshes)."""
    if mesh.analytic_source is not None and not estimated:
        src = mesh.analytic_source
        c = src.project(mesh.vertices[mesh.simplices].mean(axis=1))
        return catalog_differential_data(src, c, tol=1e-8).mean_curvature_norm ** 2
    H2 = surface_data(mesh, estimated=True).mean_curvature_norm ** 2
    return H2[mesh.simplices].mean(axis=1)


def critical_radii(surface, tie=1e-12):
    """Critical values of ``|x|`` on the surface (discrete Morse rule on meshes).

    Ties in ``|x|`` are broken by vertex index.  An interior vertex is
    regular when the sign of ``|x_w| - |x_v|`` over its link changes exactly
    twice (a polyline vertex: its two neighbours lie on opposite sides).
    Boundary vertices are skipped.
    """
    if isinstance(surface, CatalogPiece):
        return surface.critical_radii()
    X = surface.vertices
    rad = np.linalg.norm(X, axis=1)
    S = surface.simplices
    V = len(X)
    scale = tie * max(1.0, rad.max(initial=0.0))

    def sgn(a, v):
        d = rad[a] - rad[v]
        return np.where(np.abs(d) <= scale, np.sign(a - v), np.sign(d)).astype(int)

    if surface.n == 1:
        deg = np.bincount(S.ravel(), minlength=V)
        side = np.zeros(V, dtype=int)
        for a, b in ((S[:, 0], S[:, 1]), (S[:, 1], S[:, 0])):
            np.add.at(side, a, sgn(b, a))
        crit = (deg == 2) & (side != 0)
    else:
        changes = np.zeros(V, dtype=int)
        for i in range(3):
            v, a, b = S[:, i], S[:, (i + 1) % 3], S[:, (i + 2) % 3]
            np.add.at(changes, v, (sgn(a, v) != sgn(b, v)).astype(int))
        used = np.bincount(S.ravel(), minlength=V) > 0
        crit = used & (changes != 2)
    crit &= ~surface.boundary_vertices
    return np.unique(rad[crit])


def _regular_flags(surface, radii, h):
    crit = critical_radii(surface)
    radii = np.asarray(radii, dtype=float)
    if len(crit) == 0:
        return np.ones(len(radii), dtype=bool)
    d = np.min(np.abs(radii[:, None] - crit[None, :]), axis=1)
    return d >= h


def growth_profile(surface, radii, h=None, estimated=False) -> GrowthProfile:
    """Sample ``V(r)`` and ``T(r)`` on an increasing radius grid.

    Radii closer than ``h`` (mesh size by default; 1e-9 on analytic pieces)
    to a critical value of ``|x|`` are flagged as non-regular.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    if surface.R is not None and radii.max() > surface.R + 1e-12:
        raise RadiusOutOfDomainError(f"radius {radii.max()} exceeds the construction radius {surface.R}")
    if isinstance(surface, CatalogPiece):
        shape = surface.shape
        pt = shape.sample(1, rng=0)
        H2 = float(catalog_differential_data(shape, pt).mean_curvature_norm[0] ** 2)
        V = np.array([surface.radial_integral(lambda rad, t: np.ones_like(rad), rmax=r) for r in radii])
        T = H2 * V
        reg = _regular_flags(surface, radii, 1e-9 if h is None else h)
        return GrowthProfile(surface.n, radii, V, T, reg)
    h = surface.h if h is None else h
    H2 = _element_H2(surface, estimated)
    V = np.zeros(len(radii))
    T = np.zeros(len(radii))
    for i, r in enumerate(radii):
        clip = _clip_measure(surface, r)
        V[i] = clip.sum()
        T[i] = np.sum(H2 * clip)
    reg = _regular_flags(surface, radii, 0.0 if h is None else h)
    return GrowthProfile(surface.n, radii, V, T, reg)


@dataclass
class CheckResult:
    operation: str
    inputs: dict
    value: float
    tolerance: float
    passed: bool
    residual: float | None = None

    def to_json(self):
        return {
            "operation": self.operation,
            "inputs": self.inputs,
            "value": self.value,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def check_volume_growth(profile: GrowthProfile, r1, r2, tol=1e-6, R=None) -> CheckResult:
    """Slack ``V(r1)/r1^n - (1 - 2n/r2^2) V(r2)/r2^n``; passes when ``slack >= -tol``."""
    n = profile.n
    if r1 < sqrt(4 + 2 * n) - 1e-12:
        raise PreconditionError(f"r1 = {r1} is below sqrt(4 + 2n) = {sqrt(4 + 2 * n):.6f}")
    if not r1 < r2:
        raise PreconditionError("need r1 < r2")
    if R is not None and r2 > R + 1e-12:
        raise RadiusOutOfDomainError(f"r2 = {r2} exceeds R = {R}")
    V1 = profile.V[profile.at(r1)]
    V2 = profile.V[profile.at(r2)]
    slack = V1 / r1 ** n - (1 - 2 * n / r2 ** 2) * V2 / r2 ** n
    return CheckResult("check_volume_growth", {"r1": float(r1), "r2": float(r2)}, float(slack), tol,
                       bool(slack >= -tol))


def check_H2_bound(profile: GrowthProfile, tol=1e-3):
    """Per radius: ``T(r) <= (n/2) V(r) + tol V(r)`` at regular radii (others pass)."""
    bound = 0.5 * profile.n * profile.V
    ok = profile.T <= bound + tol * profile.V
    return np.where(profile.regular, ok, True)


def _slice_mesh(mesh, r, integrand):
    """Integral over the slice ``|x| = r`` of the mesh of ``integrand(points, element)``."""
    P = mesh.vertices[mesh.simplices]
    rad = np.linalg.norm(P, axis=2)
    total = 0.0
    # a simplex can cross the sphere with all its vertices outside
    diam = np.max(np.linalg.norm(P - np.roll(P, 1, axis=1), axis=2), axis=1)
    if mesh.n == 1:
        hit = np.where((rad.min(axis=1) - diam <= r) & (rad.max(axis=1) >= r))[0]
        pts = segment_sphere_points(P[hit, 0], P[hit, 1], r)
        for s, plist in zip(hit, pts):
            for x in plist:
                total += float(integrand(np.atleast_2d(x), s)[0])
        return total
    near = np.where((rad.min(axis=1) - diam <= r) & (rad.max(axis=1) >= r))[0]
    x, w = np.polynomial.legendre.leggauss(8)
    for s, (o, u, v, rho, arcs) in zip(near, triangle_sphere_arcs(P[near], r)):
        for t0, t1 in arcs:
            th = 0.5 * (t1 - t0) * x + 0.5 * (t1 + t0)
            pts = o[None] + rho * (np.cos(th)[:, None] * u[None] + np.sin(th)[:, None] * v[None])
            total += 0.5 * (t1 - t0) * rho * float(np.sum(w * integrand(pts, s)))
    return total


def _flat_tangent_norm(mesh):
    """``|x^T|`` using the flat tangent space of element ``s``."""
    P = mesh.vertices[mesh.simplices]
    if mesh.n == 1:
        d = P[:, 1] - P[:, 0]
        t = d / np.linalg.norm(d, axis=1)[:, None]

        def f(x, s):
            return np.abs(x @ t[s])
    else:
        nrm = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]

        def f(x, s):
            xn = x @ nrm[s]
            return np.sqrt(np.maximum(np.einsum("ij,ij->i", x, x) - xn * xn, 0.0))
    return f


def divergence_identity_check(surface, r, h=None, tol=0.02) -> CheckResult:
    """Compare ``2n V(r) - 4 T(r)`` with ``2 int_{dB_r} |x^T|`` at a regular radius.

    The left side comes from interior quadrature (ball clipping), the right
    side from an independent slice quadrature.  On catalog meshes ``|x^T|``
    on the slice is evaluated exactly at the projected slice points.
    """
    n = surface.n
    if isinstance(surface, CatalogPiece):
        if not _regular_flags(surface, [r], 1e-9 if h is None else h)[0]:
            raise NonRegularRadiusError(f"r = {r} is a critical value of |x|")
        prof = growth_profile(surface, [r])
        lhs = 2 * n * prof.V[0] - 4 * prof.T[0]
        rhs = 2 * surface.slice_integral(lambda rad, t: t, r)
    else:
        prof = growth_profile(surface, [r], h=h)
        if not prof.regular[0]:
            raise NonRegularRadiusError(f"r = {r} lies within h of a critical value of |x|")
        lhs = 2 * n * prof.V[0] - 4 * prof.T[0]
        src = surface.analytic_source
        if src is not None:
            def integrand(x, s):
                d = catalog_differential_data(src, src.project(x), tol=1e-8)
                return np.linalg.norm(d.x_tangent, axis=1)
        else:
            integrand = _flat_tangent_norm(surface)
        rhs = 2 * _slice_mesh(surface, r, integrand)
    scale = max(abs(lhs), abs(rhs), 2 * n * prof.V[0])
    resid = 0.0 if scale == 0 else abs(lhs - rhs) / scale
    return CheckResult("divergence_identity_check", {"r": r}, float(lhs), tol,
                       bool(resid <= tol), residual=float(resid))


def coarea_volume(mesh: DiscreteHypersurface, r, nodes=64):
    """``V(r)`` by integrating ``V'(s) = s int_{dB_s} 1/|x^T|`` over ``s`` (flat elements).

    The substitution ``s = c + (r - c) u^2`` about the smallest distance ``c``
    removes the inverse square-root singularity at the bottom of the range.
    """
    P = mesh.vertices[mesh.simplices]
    if mesh.n == 1:
        d = P[:, 1] - P[:, 0]
        tt = np.einsum("ij,ij->i", d, d)
        lam = np.clip(-np.einsum("ij,ij->i", P[:, 0], d) / tt, 0, 1)
        c = float(np.min(np.linalg.norm(P[:, 0] + lam[:, None] * d, axis=1)))
    else:
        c = float(np.min(np.linalg.norm(P.mean(axis=1), axis=1)))
        c = min(c, float(np.min(np.linalg.norm(mesh.vertices, axis=1))))
        nrm = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        c = min(c, float(np.min(np.abs(np.einsum("ij,ij->i", P[:, 0], nrm)))))
    if r <= c:
        return 0.0
    tangent = _flat_tangent_norm(mesh)
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    total = 0.0
    for ui, wi in zip(u, w):
        s = c + (r - c) * ui * ui
        dV = s * _slice_mesh(mesh, s, lambda pts, e: 1.0 / np.maximum(tangent(pts, e), 1e-300))
        total += 0.5 * wi * dV * 2 * (r - c) * ui
    return total


# -- cutoff near a singular set -----------------------------------------------------

@dataclass
class SingularSetProxy:
    """Finite stand-in for the singular set with a greedy rho-covering.

    ``centers`` come from a farthest-point greedy cover, so ``len(centers)``
    is an upper bound for the covering number.
    """

    points: np.ndarray
    rho: float
    centers: np.ndarray = field(init=False)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            self.points = self.points.reshape(0, max(self.points.shape[-1], 1))
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        self.centers = greedy_cover(self.points, self.rho)

    @property
    def m(self):
        return len(self.centers)


def greedy_cover(points, rho):
    P = np.asarray(points, dtype=float)
    if len(P) == 0:
        return P.copy()
    dist = np.full(len(P), np.inf)
    centers = []
    i = 0
    while True:
        centers.append(P[i])
        dist = np.minimum(dist, np.linalg.norm(P - P[i], axis=1))
        if dist.max() <= rho:
            break
        i = int(np.argmax(dist))
    return np.array(centers)


@dataclass
class CutoffFunction:
    """``phi = clip(d_S / rho - 1, 0, 1)``; ``values`` holds mesh vertex values."""

    singular: SingularSetProxy
    values: np.ndarray | None = None

    def evaluate(self, x):
        x = np.atleast_2d(x)
        S = self.singular
        if len(S.points) == 0:
            return np.ones(len(x))
        d, _ = cKDTree(S.points).query(x)
        return np.clip(d / S.rho - 1.0, 0.0, 1.0)


def build_cutoff(surface, S: SingularSetProxy, R=None) -> CutoffFunction:
    """Cutoff vanishing within ``rho`` of ``S`` and equal to one beyond ``2 rho``.

    Raises
    ------
    RhoTooLargeError
        If ``rho >= 1/(3R)``.
    """
    R = surface.R if R is None else R
    if S.rho >= 1.0 / (3.0 * R):
        raise RhoTooLargeError(f"rho = {S.rho} must be below 1/(3R) = {1 / (3 * R):.6g}")
    if len(S.points) and np.any(np.linalg.norm(S.points, axis=1) > R - 1 + 1e-12):
        raise PreconditionError("singular points must lie in the closed ball of radius R - 1")
    phi = CutoffFunction(S)
    if isinstance(surface, DiscreteHypersurface):
        phi.values = phi.evaluate(surface.vertices)
    return phi


def _point_band_integrals(n, center, rho, nodes=48):
    """Dirichlet and deficiency integrals of the cutoff about one point of an n-plane through 0."""
    a = float(np.linalg.norm(center))
    xt, wt = np.polynomial.legendre.leggauss(nodes)
    if n == 1:
        c, wc = np.array([-1.0, 1.0]), np.array([1.0, 1.0])
        ang = 1.0
    else:
        al = (n - 3) / 2.0
        c, wc = roots_jacobi(nodes, al, al)
        ang = sphere_area(n - 2)

    def shell(lo, hi, f):
        t = 0.5 * (hi - lo) * xt + 0.5 * (hi + lo)
        wgt = np.exp(-(a * a + t[:, None] ** 2 + 2 * a * t[:, None] * c[None]) / 4.0)
        avg = ang * np.sum(wgt * wc[None], axis=1)
        return 0.5 * (hi - lo) * np.sum(wt * t ** (n - 1) * f(t) * avg)

    dirichlet = shell(rho, 2 * rho, lambda t: np.full_like(t, rho ** -2))
    deficiency = shell(0.0, rho, np.ones_like) + shell(rho, 2 * rho, lambda t: 1 - (t / rho - 1) ** 2)
    return dirichlet, deficiency


def cutoff_energy(surface, phi: CutoffFunction, forms=None):
    """``(int |grad phi|^2 e^{-|x|^2/4}, int (1 - phi^2) e^{-|x|^2/4})``.

    On analytic pieces only planes through the origin are supported and the
    ``2 rho`` balls about distinct centres must be disjoint.
    """
    S = phi.singular
    if isinstance(surface, CatalogPiece):
        if len(S.points) == 0:
            return 0.0, 0.0
        shape = surface.shape
        if shape.k != 0:
            raise UnsupportedDimensionError("analytic cutoff energies need a plane piece")
        if np.any(shape.distance(S.points) > 1e-9):
            raise PreconditionError("singular points must lie on the plane")
        if len(S.points) > 1:
            d = np.linalg.norm(S.points[:, None] - S.points[None], axis=2)
            if np.min(d[np.triu_indices(len(S.points), 1)]) <= 4 * S.rho:
                raise PreconditionError("2 rho balls about singular points overlap")
        parts = np.array([_point_band_integrals(shape.n, p, S.rho) for p in S.points])
        return float(parts[:, 0].sum()), float(parts[:, 1].sum())
    forms = weighted_forms(surface) if forms is None else forms
    v = phi.values if phi.values is not None else phi.evaluate(surface.vertices)
    return forms.dirichlet(v, v), float(np.sum(forms.M * (1.0 - v * v)))


def plane_band_integrals(n, center, rho, nodes=48):
    """Public wrapper of the single-point analytic band integrals."""
    return _point_band_integrals(n, center, rho, nodes)
