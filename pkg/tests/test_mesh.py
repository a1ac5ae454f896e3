import numpy as np
import pytest

from shrinkerlab.catalog import GeneralizedCylinder
from shrinkerlab.errors import RadiusTooSmallError, UnsupportedDimensionError
from shrinkerlab.functional import gaussian_area
from shrinkerlab.mesh import DiscreteHypersurface, build_mesh, polyline, shrinker_residual

CASES = [(1, 0, 4.0), (1, 1, 4.0), (2, 0, 3.0), (2, 1, 3.0), (2, 2, 3.0)]


@pytest.mark.parametrize("n,k,R", CASES)
def test_catalog_mesh_invariants(n, k, R):
    m = build_mesh(GeneralizedCylinder(n, k), R, 0.2)
    assert m.check_invariants()
    assert np.all(np.linalg.norm(m.vertices, axis=1) <= R + 1e-12)
    assert m.max_edge() <= 0.2 * 1.6
    closed = k == n
    assert (len(m.boundary_facets) == 0) == closed
    assert np.array_equal(np.sort(m.boundary_facets), np.sort(m.topological_boundary_facets()))
    # boundary vertices lie on the sphere of radius R
    if not closed:
        assert np.allclose(np.linalg.norm(m.vertices[m.boundary_vertices], axis=1), R)


def test_euler_characteristics():
    assert build_mesh(GeneralizedCylinder(2, 2), 3.0, 0.3).euler_characteristic() == 2
    assert build_mesh(GeneralizedCylinder(2, 0), 3.0, 0.3).euler_characteristic() == 1
    assert build_mesh(GeneralizedCylinder(2, 1), 3.0, 0.3).euler_characteristic() == 0
    assert build_mesh(GeneralizedCylinder(1, 1), 3.0, 0.3).euler_characteristic() == 0


def test_mesh_errors():
    with pytest.raises(UnsupportedDimensionError):
        build_mesh(GeneralizedCylinder(3, 1), 3.0, 0.2)
    with pytest.raises(RadiusTooSmallError):
        build_mesh(GeneralizedCylinder(2, 2), 1.0, 0.2)
    with pytest.raises(ValueError):
        build_mesh(GeneralizedCylinder(2, 2), 3.0, -0.1)


def test_degenerate_simplex_rejected():
    m = DiscreteHypersurface(2, [[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
    with pytest.raises(ValueError):
        m.check_invariants()


def test_polyline_boundary_ids():
    p = polyline(np.array([[0.0, 0], [1, 0], [2, 0], [3, 0]]))
    assert p.boundary_vertices.tolist() == [True, False, False, True]
    c = polyline(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]]), closed=True)
    assert not c.boundary_vertices.any()


@pytest.mark.parametrize("n,k,R", CASES)
def test_exact_residual_on_vertices(n, k, R):
    m = build_mesh(GeneralizedCylinder(n, k), R, 0.2)
    assert shrinker_residual(m).max <= 1e-12


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2)])
def test_estimated_residual_converges(n, k):
    shape = GeneralizedCylinder(n, k)
    errs = [shrinker_residual(build_mesh(shape, 3.0, h), estimated=True).weighted_l2 for h in (0.2, 0.1)]
    assert errs[1] < 0.6 * errs[0]


@pytest.mark.parametrize("n,k,ref", [(1, 1, 1.5203469010662807), (2, 2, 4 / np.e), (2, 0, 1.0), (1, 0, 1.0)])
def test_gaussian_area_mesh_against_closed_form(n, k, ref):
    m = build_mesh(GeneralizedCylinder(n, k), 12.0, 0.1)
    assert abs(gaussian_area(m, order=2) - ref) < 1e-4


def test_offset_line_and_rotation():
    Q = np.array([[0.0, -1], [1, 0]])
    m = build_mesh(GeneralizedCylinder(1, 0, rotation=Q), 4.0, 0.1)
    assert np.allclose(m.vertices[:, 1], 0.0)
    off = build_mesh(GeneralizedCylinder(1, 0, center=np.array([3.0, 0])), 4.0, 0.1)
    assert np.allclose(off.vertices[:, 0], 3.0)
