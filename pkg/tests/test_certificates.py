from math import sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from shrinkerlab.catalog import CatalogPiece, GeneralizedCylinder
from shrinkerlab.certificates import certify_instability, estimate_Rn, radial_cutoff
from shrinkerlab.errors import NoFiringRadiusError, PreconditionError, RadiusOutOfDomainError
from shrinkerlab.growth import SingularSetProxy
from shrinkerlab.mesh import build_mesh


def test_line_closed_form():
    # mass = 2 int_0^4 eta^2 e^{-x^2/4}, energy = 2 int_3^4 e^{-x^2/4} on the line
    g = lambda x: np.exp(-x * x / 4)  # noqa: E731
    mass = 2 * (quad(g, 0, 3)[0] + quad(lambda x: (4 - x) ** 2 * g(x), 3, 4)[0])
    energy = 2 * quad(g, 3, 4)[0]
    c = certify_instability(CatalogPiece(GeneralizedCylinder(1, 0), 4.0), sqrt(6), 4.0)
    assert c.mass == pytest.approx(mass, rel=1e-12)
    assert c.energy == pytest.approx(energy, rel=1e-12)
    assert c.fires


def test_line_mesh_agrees_with_analytic():
    a = certify_instability(CatalogPiece(GeneralizedCylinder(1, 0), 4.0), sqrt(6), 4.0)
    m = certify_instability(build_mesh(GeneralizedCylinder(1, 0), 4.0, 0.01), sqrt(6), 4.0)
    assert m.mass == pytest.approx(a.mass, rel=1e-3)
    assert m.energy == pytest.approx(a.energy, rel=1e-3)
    assert m.fires


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_fires_with_zero_energy(n):
    c = certify_instability(CatalogPiece(GeneralizedCylinder(n, n), 5.0), sqrt(4 + 2 * n), 5.0)
    assert c.energy == 0.0 and c.fires
    if n <= 2:
        mesh = build_mesh(GeneralizedCylinder(n, n), 5.0, 0.1)
        cm = certify_instability(mesh, sqrt(4 + 2 * n), 5.0)
        assert abs(cm.energy) <= 1e-12 and cm.fires


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))),
       st.floats(0.01, 6), st.floats(0.01, 2))
def test_margin_monotone_in_r2(nk, a, d):
    n, k = nk
    r1 = sqrt(4 + 2 * n)
    r2 = r1 + 1 + a
    piece = CatalogPiece(GeneralizedCylinder(n, k), r2 + d)
    m1 = certify_instability(piece, r1, r2).margin
    m2 = certify_instability(piece, r1, r2 + d).margin
    assert m2 >= m1 - 1e-12


def test_radial_cutoff():
    m = build_mesh(GeneralizedCylinder(1, 0), 4.0, 0.1)
    eta = radial_cutoff(m, 3.5)
    rad = np.linalg.norm(m.vertices, axis=1)
    assert np.all(eta[rad <= 2.5] == 1) and np.all(eta[rad >= 3.5] == 0)
    with pytest.raises(RadiusOutOfDomainError):
        radial_cutoff(m, 4.5)
    with pytest.raises(RadiusOutOfDomainError):
        radial_cutoff(m, 0.5)


def test_preconditions():
    piece = CatalogPiece(GeneralizedCylinder(1, 0), 6.0)
    with pytest.raises(PreconditionError):
        certify_instability(piece, 2.0, 5.0)
    with pytest.raises(PreconditionError):
        certify_instability(piece, sqrt(6), 3.2)
    with pytest.raises(RadiusOutOfDomainError):
        certify_instability(piece, sqrt(6), 7.0)


def test_singular_correction_analytic_vs_mesh():
    r1, r2, rho = sqrt(8), 4.0, 0.06
    S = SingularSetProxy(np.array([[0.0, 1.0, 0.5]]), rho)
    a0 = certify_instability(CatalogPiece(GeneralizedCylinder(2, 0), r2), r1, r2)
    a = certify_instability(CatalogPiece(GeneralizedCylinder(2, 0), r2), r1, r2, S=S, eps=1.0)
    mesh = build_mesh(GeneralizedCylinder(2, 0), r2, 0.02)
    m = certify_instability(mesh, r1, r2, S=S, eps=1.0)
    assert a.mass < a0.mass and a.energy > a0.energy
    assert m.mass == pytest.approx(a.mass, rel=5e-3)
    # first-order P1 error of the cutoff gradient at h = rho / 3
    assert m.energy == pytest.approx(a.energy, rel=0.1)
    assert a.to_json()["cutoff_within_eps"] is False
    assert certify_instability(CatalogPiece(GeneralizedCylinder(2, 0), r2), r1, r2, S=S,
                               eps=10.0).to_json()["cutoff_within_eps"]


def test_rn_grid_refinement_monotone():
    coarse = estimate_Rn(1, step=0.25)
    fine = estimate_Rn(1, step=0.125)
    for k in coarse.Rstar:
        assert fine.Rstar[k] <= coarse.Rstar[k]
        assert fine.Rstar[k] > coarse.Rstar[k] - 0.25
    assert coarse.value == 3.5


def test_rn_values_and_csv():
    est = estimate_Rn(2)
    assert all(sqrt(8) + 1 < v <= 20 for v in est.Rstar.values())
    lines = est.to_csv({"n": 2}).splitlines()
    assert lines[0].startswith("# ") and lines[1] == "n,k,Rstar,r1,r2,mass,energy,margin"
    assert len(lines) == 2 + 3
    with pytest.raises(ValueError):
        estimate_Rn(2, step=0.5)


def test_rn_strict_cap():
    with pytest.raises(NoFiringRadiusError):
        estimate_Rn(3, cap=4.0, strict=True)
    assert np.isnan(estimate_Rn(3, cap=4.0).value)
