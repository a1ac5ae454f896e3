import csv
import io
import json
from math import sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shrinkerlab.catalog import CatalogPiece, GeneralizedCylinder
from shrinkerlab.errors import (
    NonRegularRadiusError,
    PreconditionError,
    RadiusOutOfDomainError,
    RhoTooLargeError,
)
from shrinkerlab.growth import (
    SingularSetProxy,
    build_cutoff,
    check_H2_bound,
    check_volume_growth,
    coarea_volume,
    critical_radii,
    cutoff_energy,
    divergence_identity_check,
    growth_profile,
    plane_band_integrals,
)
from shrinkerlab.mesh import build_mesh

PLANE = build_mesh(GeneralizedCylinder(2, 0), 5.0, 0.1)
CYL = build_mesh(GeneralizedCylinder(2, 1), 4.0, 0.1)


def test_plane_volume_exact():
    r = np.array([0.5, 1.0, 2.5, 4.0])
    prof = growth_profile(PLANE, r)
    assert np.allclose(prof.V, np.pi * r ** 2, rtol=1e-12)
    assert np.all(prof.T == 0)


def test_cylinder_volume_against_closed_form():
    # V(r) = 2 pi sqrt2 * 2 sqrt(r^2 - 2) on S^1_{sqrt2} x R
    r = np.array([2.0, 3.0, 3.9])
    prof = growth_profile(CYL, r)
    ref = 2 * np.pi * sqrt(2) * 2 * np.sqrt(r ** 2 - 2)
    assert np.allclose(prof.V, ref, rtol=5e-3)
    assert np.allclose(prof.T, 0.5 * prof.V, rtol=1e-12)


def test_coarea_volume_matches_clipping():
    v = coarea_volume(PLANE, 3.0)
    assert v == pytest.approx(9 * np.pi, rel=1e-6)


def test_profile_csv_round_trip():
    prof = growth_profile(PLANE, [1.0, 2.0, 3.0])
    text = prof.to_csv({"h": 0.1})
    head, body = text.split("\n", 1)
    assert json.loads(head[2:]) == {"h": 0.1}
    rows = list(csv.DictReader(io.StringIO(body)))
    assert [float(r["V"]) for r in rows] == list(prof.V)


def test_profile_errors():
    with pytest.raises(RadiusOutOfDomainError):
        growth_profile(PLANE, [1.0, 6.0])
    with pytest.raises(ValueError):
        growth_profile(PLANE, [2.0, 1.0])
    prof = growth_profile(PLANE, [3.0, 4.0])
    with pytest.raises(PreconditionError):
        check_volume_growth(prof, 2.0, 4.0)
    with pytest.raises(ValueError):
        prof.at(3.5)


@pytest.mark.parametrize("n,k", [(n, k) for n in (1, 2, 3) for k in range(n + 1)])
def test_volume_growth_and_H2_on_catalog(n, k):
    piece = CatalogPiece(GeneralizedCylinder(n, k), 10.0)
    r1 = sqrt(4 + 2 * n)
    grid = np.unique(np.r_[r1, np.arange(0.5, 10.01, 0.5)])
    prof = growth_profile(piece, grid)
    for a in grid[grid >= r1]:
        for b in grid[grid > a]:
            assert check_volume_growth(prof, a, b).passed
    assert np.all(check_H2_bound(prof))


def test_sphere_attains_H2_bound():
    for n in (1, 2, 3):
        prof = growth_profile(CatalogPiece(GeneralizedCylinder(n, n), 5.0), [3.0, 4.0])
        assert np.allclose(prof.T, 0.5 * n * prof.V, rtol=1e-12)


def test_critical_radii_and_regularity():
    # one discrete critical value per circle of minima, within h of sqrt 2
    assert np.allclose(critical_radii(CYL), [sqrt(2)], atol=0.1)
    prof = growth_profile(CYL, [1.45, 3.0])
    assert prof.regular.tolist() == [False, True]
    with pytest.raises(NonRegularRadiusError):
        divergence_identity_check(CYL, 1.45)


def test_divergence_identity_mesh_and_analytic():
    res = [divergence_identity_check(build_mesh(GeneralizedCylinder(2, 1), 4.0, h), 3.0).residual
           for h in (0.1, 0.05)]
    assert res[0] <= 0.02 and res[1] <= 0.5 * res[0]
    assert divergence_identity_check(PLANE, 3.0).residual <= 1e-10
    for n in (1, 2, 3):
        for k in range(n + 1):
            chk = divergence_identity_check(CatalogPiece(GeneralizedCylinder(n, k), 6.0), 4.0)
            assert chk.residual <= 1e-10


def test_divergence_identity_without_analytic_source():
    from shrinkerlab.mesh import DiscreteHypersurface

    bare = DiscreteHypersurface(2, PLANE.vertices, PLANE.simplices, PLANE.boundary_facets, R=5.0, h=0.1)
    assert divergence_identity_check(bare, 3.0).residual <= 1e-10


# -- cutoffs -------------------------------------------------------------------------

points2 = st.lists(st.tuples(st.floats(-2.5, 2.5), st.floats(-2.5, 2.5)), min_size=1, max_size=6)


def _on_plane(pts):
    P = np.array(pts, dtype=float)
    return np.c_[np.zeros(len(P)), P]


@given(points2, st.floats(0.01, 0.06))
def test_cutoff_lipschitz_and_range(pts, rho):
    S = SingularSetProxy(_on_plane(pts), rho)
    phi = build_cutoff(PLANE, S)
    x = PLANE.vertices
    v = phi.values
    assert np.all((v >= 0) & (v <= 1))
    E = PLANE.edges
    dv = np.abs(v[E[:, 0]] - v[E[:, 1]])
    dx = np.linalg.norm(x[E[:, 0]] - x[E[:, 1]], axis=1)
    assert np.all(dv <= dx / rho + 1e-12)
    d = np.min(np.linalg.norm(x[:, None] - S.points[None], axis=2), axis=1)
    assert np.all(v[d <= rho] == 0) and np.all(v[d >= 2 * rho] == 1)


@given(points2, points2)
def test_cutoff_monotone_under_subset(a, b):
    rho = 0.05
    small = SingularSetProxy(_on_plane(a), rho)
    big = SingularSetProxy(_on_plane(a + b), rho)
    assert np.all(build_cutoff(PLANE, big).values <= build_cutoff(PLANE, small).values)


@given(points2, st.floats(0.02, 0.5))
def test_greedy_cover(pts, rho):
    S = SingularSetProxy(_on_plane(pts), rho)
    d = np.min(np.linalg.norm(S.points[:, None] - S.centers[None], axis=2), axis=1)
    assert np.all(d <= rho + 1e-12)
    assert S.m <= len(S.points)


def test_cutoff_errors():
    with pytest.raises(RhoTooLargeError):
        build_cutoff(PLANE, SingularSetProxy(np.zeros((1, 3)), 0.1))
    with pytest.raises(PreconditionError):
        build_cutoff(PLANE, SingularSetProxy(np.array([[0.0, 4.5, 0]]), 0.01))
    empty = build_cutoff(PLANE, SingularSetProxy(np.zeros((0, 3)), 0.01))
    assert np.all(empty.values == 1)


def test_band_integral_against_radial_oracle():
    rho = 0.05
    D, deficiency = plane_band_integrals(2, np.zeros(3), rho)
    # at the origin: int_rho^{2rho} 2 pi t rho^-2 e^{-t^2/4} dt
    t = np.linspace(rho, 2 * rho, 20001)
    ref = np.trapezoid(2 * np.pi * t * np.exp(-t ** 2 / 4) / rho ** 2, t)
    assert D == pytest.approx(ref, rel=1e-8)
    assert deficiency > 0


def test_cutoff_energy_mesh_converges_to_analytic():
    rho = 0.06
    S = SingularSetProxy(np.array([[0.0, 1.0, 0.5]]), rho)
    D_ref, def_ref = plane_band_integrals(2, S.points[0], rho)
    errs = []
    for h in (0.02, 0.01):
        fine = build_mesh(GeneralizedCylinder(2, 0), 2.0, h)
        D, deficiency = cutoff_energy(fine, build_cutoff(fine, S, R=5.0))
        errs.append(abs(D - D_ref))
        assert deficiency == pytest.approx(def_ref, rel=0.01)
    assert errs[1] <= 0.6 * errs[0]


@pytest.mark.parametrize("n,ratio", [(1, 2.0), (2, 1.0), (3, 0.5), (4, 0.25)])
def test_cutoff_dirichlet_scaling(n, ratio):
    c = np.zeros(n + 1)
    c[1] = 1.0
    vals = [plane_band_integrals(n, c, rho)[0] for rho in (0.02, 0.01, 0.005)]
    for a, b in zip(vals[:-1], vals[1:]):
        assert b / a == pytest.approx(ratio, rel=0.02)


def test_analytic_cutoff_energy_rejects_overlap_and_curved():
    piece = CatalogPiece(GeneralizedCylinder(3, 0), 5.0)
    S = SingularSetProxy(np.array([[0, 1.0, 0, 0], [0, 1.05, 0, 0]]), 0.02)
    with pytest.raises(PreconditionError):
        cutoff_energy(piece, build_cutoff(piece, S))
