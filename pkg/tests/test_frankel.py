from math import erf, pi, sqrt

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from shrinkerlab.catalog import GeneralizedCylinder
from shrinkerlab.errors import (
    CoreBallError,
    DimensionMismatchError,
    InfeasibleBoundaryError,
    UnsupportedDimensionError,
)
from shrinkerlab.frankel import (
    discrete_F_gradient,
    DisjointEvidence,
    FrankelProblem,
    Intersect,
    discrete_F,
    find_segment,
    frankel_verdict,
    intersection_test,
    minimize_F_graph,
    minimize_F_obstacle,
)
from shrinkerlab.mesh import DiscreteHypersurface, build_mesh, polyline

R90 = np.array([[0.0, -1], [1, 0]])


def _rot(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def _offset_lines(a=3.0, R=4.0, h=0.1):
    left = build_mesh(GeneralizedCylinder(1, 0, center=np.array([-a, 0.0])), R, h)
    right = build_mesh(GeneralizedCylinder(1, 0, center=np.array([a, 0.0])), R, h)
    return left, right


def _dijkstra_F(a, b, box, R, step=0.02):
    """Least Gaussian length between grid points a and b by Dijkstra on a 16-neighbour grid."""
    xs = np.arange(box[0], box[1] + 1e-9, step)
    ys = np.arange(-R, R + 1e-9, step)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    ok = X ** 2 + Y ** 2 <= R * R
    idx = -np.ones(X.shape, dtype=int)
    idx[ok] = np.arange(ok.sum())
    moves = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
    rows, cols, w = [], [], []
    for di, dj in moves:
        i0 = slice(max(0, -di), X.shape[0] - max(0, di))
        i1 = slice(max(0, di), X.shape[0] - max(0, -di) if di < 0 else X.shape[0])
        j0 = slice(max(0, -dj), X.shape[1] - max(0, dj))
        j1 = slice(max(0, dj), X.shape[1] + min(0, dj) if dj < 0 else X.shape[1])
        A, B = idx[i0, j0], idx[i1, j1]
        m = (A >= 0) & (B >= 0)
        pa = np.stack([X[i0, j0][m], Y[i0, j0][m]], 1)
        pb = np.stack([X[i1, j1][m], Y[i1, j1][m]], 1)
        # Simpson rule for the weight along each straight edge
        f = lambda p: np.exp(-np.sum(p * p, 1) / 4)  # noqa: E731
        L = np.linalg.norm(pb - pa, axis=1)
        rows.append(A[m]); cols.append(B[m])
        w.append(L * (f(pa) + 4 * f(0.5 * (pa + pb)) + f(pb)) / 6)
    G = sparse.coo_matrix((np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(ok.sum(), ok.sum())).tocsr()
    ia = idx[np.argmin(np.abs(xs - a[0])), np.argmin(np.abs(ys - a[1]))]
    ib = idx[np.argmin(np.abs(xs - b[0])), np.argmin(np.abs(ys - b[1]))]
    return float(dijkstra(G, directed=False, indices=ia)[ib]) / sqrt(4 * pi)


def test_discrete_F_exact_on_catalog():
    circle = build_mesh(GeneralizedCylinder(1, 1), 3.0, 0.02)
    assert discrete_F(circle.vertices, circle.simplices) == pytest.approx(1.5203469010662807, rel=1e-4)


def test_discrete_F_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((12, 3))
    S = np.array([[0, 1, 2], [1, 3, 2], [4, 5, 6], [6, 7, 8], [9, 10, 11]])
    G = discrete_F_gradient(X, S)
    eps = 1e-6
    for v in range(12):
        for k in range(3):
            E = np.zeros_like(X)
            E[v, k] = eps
            fd = (discrete_F(X + E, S) - discrete_F(X - E, S)) / (2 * eps)
            assert abs(fd - G[v, k]) < 1e-8


def test_obstacle_descent_straightens_segment():
    left, right = _offset_lines()
    seg = np.array([[-3.0, 0.0], [3.0, 0.0]])
    problem = FrankelProblem(left, right, 4.0, seg)
    t = np.linspace(0, 1, 41)
    bent = np.stack([1.2 * np.sin(pi * t), -1 + 2 * t], axis=1)
    mini = minimize_F_obstacle(problem, initial=(bent, False), h=0.05, nudge=0)
    exact = (4 * pi) ** -0.5 * 2 * sqrt(pi) * erf(0.5)
    assert mini.converged and mini.monotone()
    assert mini.F == pytest.approx(exact, rel=1e-4)
    oracle = _dijkstra_F((0.0, -1.0), (0.0, 1.0), (-3.0, 3.0), 4.0)
    assert mini.F <= oracle + 1e-9
    assert mini.F == pytest.approx(oracle, rel=2e-2)
    assert np.allclose(mini.gamma.vertices[:, 0], 0.0, atol=1e-3)


@pytest.mark.parametrize("h", [0.1, 0.05])
def test_disjoint_double_gives_firing_certificate(h):
    a = build_mesh(GeneralizedCylinder(1, 1), 4.0, h)
    b = build_mesh(GeneralizedCylinder(1, 1, radius=1.9), 4.0, h)
    v = frankel_verdict(a, b, 4.0)
    assert isinstance(v, DisjointEvidence)
    m = v.minimizer
    assert m.monotone()
    assert m.complementarity >= -1e-9
    assert m.contact[:, 1].sum() > 0 and m.contact[:, 0].sum() == 0
    assert v.certificate.fires and v.to_json()["certificate"]["fires"]
    # the minimizer lies on the 1.9 circle: F = (4 pi)^{-1/2} 2 pi 1.9 e^{-1.9^2/4}
    ref = (4 * pi) ** -0.5 * 2 * pi * 1.9 * np.exp(-1.9 ** 2 / 4)
    assert m.F == pytest.approx(ref, rel=5 * h ** 2)
    if h <= 0.05:
        # at h = 0.1 vertices stall tangentially on the polygonal obstacle
        assert m.converged


def test_catalog_curves_all_intersect():
    shapes = [build_mesh(GeneralizedCylinder(1, 1), 4.0, 0.1)]
    shapes += [build_mesh(GeneralizedCylinder(1, 0, rotation=_rot(pi * j / 8)), 4.0, 0.1) for j in range(8)]
    for i in range(len(shapes)):
        for j in range(len(shapes)):
            if i != j:
                v = frankel_verdict(shapes[i], shapes[j], 4.0)
                assert isinstance(v, Intersect) and v.witnesses
                for _, _, p in v.witnesses:
                    assert np.linalg.norm(p) <= 4.0 + 1e-9


def test_line_against_itself():
    line = build_mesh(GeneralizedCylinder(1, 0), 4.0, 0.1)
    assert len(intersection_test(line, line)) >= line.simplices.shape[0]


def test_cylinder_meets_plane():
    P = np.array([[0.0, 1, 0], [0, 0, 1], [1, 0, 0]])  # sends e0 to e2: the plane {x3 = 0}
    plane = build_mesh(GeneralizedCylinder(2, 0, rotation=P), 3.0, 0.2)
    assert np.allclose(plane.vertices[:, 2], 0.0)
    cyl = build_mesh(GeneralizedCylinder(2, 1), 3.0, 0.2)
    wit = intersection_test(cyl, plane)
    assert wit
    pts = np.array([p for _, _, p in wit])
    assert np.allclose(pts[:, 2], 0.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(pts[:, :2], axis=1), sqrt(2), atol=0.05)


def test_sphere_meets_plane_on_equator():
    sphere = build_mesh(GeneralizedCylinder(2, 2), 3.0, 0.2)
    plane = build_mesh(GeneralizedCylinder(2, 0), 3.0, 0.2)
    pts = np.array([p for _, _, p in intersection_test(sphere, plane)])
    assert len(pts) and np.allclose(np.linalg.norm(pts, axis=1), 2.0, atol=0.05)


def test_circle_and_far_line_are_disjoint():
    circle = build_mesh(GeneralizedCylinder(1, 1), 4.0, 0.1)
    line = build_mesh(GeneralizedCylinder(1, 0, rotation=R90, center=np.array([0.0, 3.0])), 4.0, 0.1)
    assert np.allclose(line.vertices[:, 1], 3.0)
    assert intersection_test(circle, line) == []
    seg = find_segment(circle, line)
    assert not seg.intersects
    assert seg.segment[0][1] == pytest.approx(sqrt(2), abs=0.01)
    assert seg.segment[1][1] == pytest.approx(3.0)


def test_core_ball_violation():
    circle = build_mesh(GeneralizedCylinder(1, 1), 4.0, 0.1)
    far = polyline(np.stack([np.full(20, 5.0), np.linspace(-1, 1, 20)], axis=1))
    with pytest.raises(CoreBallError):
        find_segment(circle, far)


def test_errors():
    circle = build_mesh(GeneralizedCylinder(1, 1), 4.0, 0.1)
    sphere = build_mesh(GeneralizedCylinder(2, 2), 3.0, 0.3)
    with pytest.raises(DimensionMismatchError):
        intersection_test(circle, sphere)
    left, right = _offset_lines()
    problem = FrankelProblem(left, right, 4.0, np.array([[-3.0, 0.0], [3.0, 0.0]]))
    with pytest.raises(InfeasibleBoundaryError):
        bad = np.array([[-3.5, 0.0], [0.0, 0.0], [0.0, 1.0]])
        minimize_F_obstacle(problem, initial=(bad, False))
    plane = build_mesh(GeneralizedCylinder(2, 0), 3.0, 0.3)
    with pytest.raises(UnsupportedDimensionError):
        minimize_F_graph(circle, circle, 3.0)
    with pytest.raises(UnsupportedDimensionError):
        minimize_F_graph(plane, plane, 3.0)  # vertical plane is not a graph over x3 = 0


def _graph(R, h, z):
    P = np.array([[0.0, 1, 0], [0, 0, 1], [1, 0, 0]])
    m = build_mesh(GeneralizedCylinder(2, 0, rotation=P), R, h)
    X = m.vertices.copy()
    X[:, 2] = z(X)
    return DiscreteHypersurface(2, X, m.simplices, m.boundary_facets, R=R, h=h)


def test_graph_obstacle_descent_invariants():
    # a sheet dipping towards the origin rises into the gap to lower F
    lower = _graph(2.0, 0.25, lambda X: 1.0 - 0.5 * np.exp(-np.sum(X[:, :2] ** 2, 1)))
    upper = _graph(3.0, 0.25, lambda X: np.full(len(X), 1.5))
    mini = minimize_F_graph(lower, upper, 2.0, max_iter=300)
    assert mini.converged and mini.monotone() and mini.F < mini.F_initial
    z = mini.gamma.vertices[:, 2]
    assert np.all(z >= lower.vertices[:, 2] - 1e-12) and np.all(z <= 1.5 + 1e-12)
    assert np.array_equal(mini.gamma.vertices[mini.fixed], lower.vertices[mini.fixed])
    assert mini.complementarity >= -1e-9
