"""Simplicial hypersurfaces (polylines and triangle meshes) of catalog pieces.

A facet of simplex ``s`` opposite its local vertex ``j`` has the id
``s * (n + 1) + j``; boundary facets are stored by id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import ceil, pi, sqrt

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay

from .catalog import (
    DifferentialData,
    GeneralizedCylinder,
    SHRINKER_SIGN,
    catalog_differential_data,
    shrinker_residual_pointwise,
)
from .errors import (
    DegenerateStarError,
    RadiusTooSmallError,
    UnsupportedDimensionError,
)
from .geometry import barycentric_gradients, simplex_volumes

__all__ = [
    "DiscreteHypersurface",
    "build_mesh",
    "polyline",
    "estimate_differential_data",
    "surface_data",
    "shrinker_residual",
    "ResidualStats",
    "simplex_quadrature",
]


def simplex_quadrature(n, order=1):
    """Barycentric points and weights (summing to one) on the reference n-simplex."""
    if order == 1:
        return np.full((1, n + 1), 1.0 / (n + 1)), np.ones(1)
    if n == 1:
        x, w = np.polynomial.legendre.leggauss(3)
        lam = 0.5 * (x + 1.0)
        return np.stack([1 - lam, lam], axis=1), 0.5 * w
    if n == 2:
        a, b = 2.0 / 3.0, 1.0 / 6.0
        pts = np.array([[a, b, b], [b, a, b], [b, b, a]])
        return pts, np.full(3, 1.0 / 3.0)
    raise UnsupportedDimensionError(f"no quadrature rule for n={n}")


@dataclass(eq=False)
class DiscreteHypersurface:
    """Codimension-one simplicial hypersurface.

    Attributes
    ----------
    vertices : (V, N) float array
    simplices : (S, n+1) int array
    boundary_facets : int array of facet ids (see module docstring)
    analytic_source : GeneralizedCylinder or None
        Catalog shape the vertices sample; enables exact differential data
        and curved quadrature.
    """

    n: int
    vertices: np.ndarray
    simplices: np.ndarray
    boundary_facets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    analytic_source: GeneralizedCylinder | None = None
    R: float | None = None
    h: float | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, self.n + 1)
        self.simplices = np.asarray(self.simplices, dtype=int).reshape(-1, self.n + 1)
        self.boundary_facets = np.asarray(self.boundary_facets, dtype=int).ravel()

    @property
    def N(self):
        return self.vertices.shape[1]

    @property
    def num_vertices(self):
        return len(self.vertices)

    @cached_property
    def volumes(self):
        return simplex_volumes(self.vertices, self.simplices)

    @cached_property
    def grads(self):
        return barycentric_gradients(self.vertices, self.simplices)

    def facet_vertices(self, facet_ids):
        """Vertex tuples (sorted) of the given facet ids."""
        facet_ids = np.asarray(facet_ids, dtype=int)
        s, j = np.divmod(facet_ids, self.n + 1)
        keep = np.ones((len(facet_ids), self.n + 1), dtype=bool)
        keep[np.arange(len(facet_ids)), j] = False
        verts = self.simplices[s][keep].reshape(len(facet_ids), self.n)
        return np.sort(verts, axis=1)

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(self.num_vertices, dtype=bool)
        if len(self.boundary_facets):
            mask[self.facet_vertices(self.boundary_facets).ravel()] = True
        return mask

    @cached_property
    def edges(self):
        S = self.simplices
        pairs = [S[:, [i, j]] for i in range(self.n + 1) for j in range(i + 1, self.n + 1)]
        if not pairs or len(S) == 0:
            return np.zeros((0, 2), dtype=int)
        E = np.sort(np.concatenate(pairs), axis=1)
        return np.unique(E, axis=0)

    @cached_property
    def adjacency(self):
        E = self.edges
        V = self.num_vertices
        data = np.ones(2 * len(E))
        A = sparse.coo_matrix((data, (np.r_[E[:, 0], E[:, 1]], np.r_[E[:, 1], E[:, 0]])),
                              shape=(V, V)).tocsr()
        A.data[:] = 1.0
        return A

    def max_edge(self):
        E = self.edges
        if len(E) == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices[E[:, 0]] - self.vertices[E[:, 1]], axis=1).max())

    def euler_characteristic(self):
        V = len(np.unique(self.simplices)) if len(self.simplices) else 0
        if self.n == 1:
            return V - len(self.simplices)
        return V - len(self.edges) + len(self.simplices)

    def topological_boundary_facets(self):
        return topological_boundary_facets(self.simplices, self.n)

    def quadrature(self, order=1, curved=None):
        """Quadrature points (S, q, N) and weights (S, q) including element measure.

        With ``curved`` (default: whenever an analytic source exists) the flat
        points are projected onto the source shape and the weights carry the
        Jacobian of that projection, so integrals are over the exact surface.
        """
        lam, w = simplex_quadrature(self.n, order)
        X = np.einsum("qa,sak->sqk", lam, self.vertices[self.simplices])
        W = self.volumes[:, None] * w[None, :]
        if curved is None:
            curved = self.analytic_source is not None
        if curved and self.analytic_source is not None and len(self.simplices):
            src = self.analytic_source
            flat = X.reshape(-1, self.N)
            J = src.projection_jacobian(flat)
            E = self.vertices[self.simplices[:, 1:]] - self.vertices[self.simplices[:, :1]]
            E = np.repeat(np.transpose(E, (0, 2, 1)), len(w), axis=0)  # (S*q, N, n)
            JE = J @ E
            g_curved = np.linalg.det(np.transpose(JE, (0, 2, 1)) @ JE)
            g_flat = np.linalg.det(np.transpose(E, (0, 2, 1)) @ E)
            ratio = np.sqrt(np.maximum(g_curved, 0) / g_flat).reshape(W.shape)
            W = W * ratio
            X = src.project(flat).reshape(X.shape)
        return X, W

    def check_invariants(self, tol=1e-14):
        """Raise ``ValueError`` describing the first violated mesh invariant."""
        if len(self.simplices):
            E = self.vertices[self.simplices]
            diam = max(np.ptp(E.reshape(-1, self.N), axis=0).max(), 1e-300)
            bad = np.where(self.volumes <= tol * diam ** self.n)[0]
            if len(bad):
                raise ValueError(f"simplex {bad[0]} is degenerate")
            if not is_consistently_oriented(self.simplices, self.n):
                raise ValueError("simplices are not consistently oriented")
        return True


def topological_boundary_facets(simplices, n):
    """Facet ids that belong to exactly one simplex."""
    S = np.asarray(simplices)
    if len(S) == 0:
        return np.zeros(0, dtype=int)
    ids, keys = [], []
    for j in range(n + 1):
        cols = [c for c in range(n + 1) if c != j]
        keys.append(np.sort(S[:, cols], axis=1))
        ids.append(np.arange(len(S)) * (n + 1) + j)
    keys = np.concatenate(keys)
    ids = np.concatenate(ids)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return np.sort(ids[counts[inv.ravel()] == 1])


def is_consistently_oriented(simplices, n):
    """Adjacent simplices must induce opposite orientations on shared facets."""
    S = np.asarray(simplices)
    if n == 1:
        return len(np.unique(S[:, 0])) == len(S) and len(np.unique(S[:, 1])) == len(S)
    directed = np.concatenate([S[:, [0, 1]], S[:, [1, 2]], S[:, [2, 0]]])
    return len(np.unique(directed, axis=0)) == len(directed)


# -- construction -------------------------------------------------------------

def polyline(points, closed=False, source=None, boundary_radius=None):
    """Polyline surface from ordered points; open ends become boundary facets."""
    P = np.asarray(points, dtype=float)
    m = len(P)
    if closed:
        S = np.stack([np.arange(m), (np.arange(m) + 1) % m], axis=1)
        bf = np.zeros(0, dtype=int)
    else:
        S = np.stack([np.arange(m - 1), np.arange(1, m)], axis=1)
        # facet opposite local vertex 1 of the first segment is vertex 0
        bf = np.array([1, 2 * (m - 2)]) if m >= 2 else np.zeros(0, dtype=int)
    return DiscreteHypersurface(1, P, S, bf, analytic_source=source, R=boundary_radius)


def _line_range(shape, R):
    """Parameter interval of the Euclidean factor of a (possibly offset) line inside B_R."""
    Q, c = shape.rotation, shape.center
    d = Q[:, 1]
    base = c
    b = base @ d
    cc = base @ base - R * R
    disc = b * b - cc
    if disc <= 0:
        raise RadiusTooSmallError(f"B_{R} misses the line")
    return -b - sqrt(disc), -b + sqrt(disc), base, d


def _disk_points(radius, h):
    J = max(1, ceil(radius / h))
    pts = [np.zeros((1, 2))]
    for j in range(1, J + 1):
        rho = radius * j / J
        m = max(6 * j, ceil(2 * pi * rho / h))
        th = 2 * pi * (np.arange(m) + 0.5 * (j % 2)) / m
        pts.append(rho * np.stack([np.cos(th), np.sin(th)], axis=1))
    return np.concatenate(pts), J


def _icosphere(freq):
    t = (1.0 + sqrt(5.0)) / 2.0
    V = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    V /= np.linalg.norm(V, axis=1)[:, None]
    F = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    f = freq
    ij = [(i, j) for i in range(f + 1) for j in range(f + 1 - i)]
    local = {key: idx for idx, key in enumerate(ij)}
    bary = np.array([[(f - i - j) / f, i / f, j / f] for i, j in ij])
    tris = []
    for i in range(f):
        for j in range(f - i):
            tris.append((local[(i, j)], local[(i + 1, j)], local[(i, j + 1)]))
            if j < f - i - 1:
                tris.append((local[(i + 1, j)], local[(i + 1, j + 1)], local[(i, j + 1)]))
    tris = np.array(tris)
    allpts = np.einsum("pa,fak->fpk", bary, V[F]).reshape(-1, 3)
    alltris = (tris[None] + (np.arange(len(F)) * len(ij))[:, None, None]).reshape(-1, 3)
    allpts /= np.linalg.norm(allpts, axis=1)[:, None]
    key = np.round(allpts * 1e9).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return allpts[first], inv.ravel()[alltris]


def build_mesh(shape: GeneralizedCylinder, R: float, h: float) -> DiscreteHypersurface:
    """Mesh of ``B_R`` intersected with ``shape`` for n in {1, 2}.

    Raises
    ------
    UnsupportedDimensionError
        For n >= 3 (use :class:`~shrinkerlab.catalog.CatalogPiece`).
    RadiusTooSmallError
        When the ball misses the shape.
    """
    n, k = shape.n, shape.k
    if n not in (1, 2) or shape.N != n + 1:
        raise UnsupportedDimensionError(f"meshes exist for hypersurfaces with n in {{1, 2}}, got n={n}")
    if h <= 0:
        raise ValueError("h must be positive")
    centered = not np.any(shape.center)
    if k > 0 and (R <= shape.r if centered else R <= np.linalg.norm(shape.center) + shape.r):
        if k < n or centered:
            raise RadiusTooSmallError(f"B_{R} does not contain the sphere factor of radius {shape.r:.4g}")
        raise RadiusTooSmallError(f"B_{R} does not enclose the offset {shape.label}")

    if n == 1 and k == 0:
        if shape.r != 0:
            raise ValueError("lines need a zero sphere radius (use center to offset)")
        t0, t1, base, d = _line_range(shape, R)
        m = max(1, ceil((t1 - t0) / h))
        t = np.linspace(t0, t1, m + 1)
        P = base[None] + t[:, None] * d[None]
        return _finish(polyline(P, source=shape, boundary_radius=R), R, h)

    if n == 1 and k == 1:
        m = 4 * max(2, ceil(2 * pi * shape.r / h / 4))
        th = 2 * pi * np.arange(m) / m
        y = shape.r * np.stack([np.cos(th), np.sin(th)], axis=1)
        return _finish(polyline(shape.from_standard(y), closed=True, source=shape), R, h)

    if k == 0:
        if shape.r != 0:
            raise ValueError("planes need a zero sphere radius (use center to offset)")
        Q, c = shape.rotation, shape.center
        foot = c - (c @ Q[:, 1]) * Q[:, 1] - (c @ Q[:, 2]) * Q[:, 2]
        rad2 = R * R - foot @ foot
        if rad2 <= 0:
            raise RadiusTooSmallError(f"B_{R} misses the plane")
        uv, _ = _disk_points(sqrt(rad2), h)
        tri = Delaunay(uv).simplices
        e1, e2 = uv[tri[:, 1]] - uv[tri[:, 0]], uv[tri[:, 2]] - uv[tri[:, 0]]
        area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        tri[area2 < 0] = tri[area2 < 0][:, [0, 2, 1]]
        P = foot[None] + uv[:, :1] * Q[:, 1][None] + uv[:, 1:] * Q[:, 2][None]
        mesh = DiscreteHypersurface(2, P, tri, analytic_source=shape, R=R)
        mesh.boundary_facets = mesh.topological_boundary_facets()
        return _finish(mesh, R, h)

    if k == 1:
        if not centered:
            raise ValueError("offset cylinders are not meshed")
        r = shape.r
        Z = sqrt(R * R - r * r)
        mth = 4 * max(2, ceil(2 * pi * r / h / 4))
        nz = max(1, ceil(2 * Z / h))
        th = 2 * pi * np.arange(mth) / mth
        z = np.linspace(-Z, Z, nz + 1)
        TH, ZZ = np.meshgrid(th, z, indexing="ij")
        y = np.stack([r * np.cos(TH).ravel(), r * np.sin(TH).ravel(), ZZ.ravel()], axis=1)
        idx = np.arange(mth * (nz + 1)).reshape(mth, nz + 1)
        i0, i1 = idx, np.roll(idx, -1, axis=0)
        a, b, c, d = i0[:, :-1], i1[:, :-1], i1[:, 1:], i0[:, 1:]
        tri = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])
        mesh = DiscreteHypersurface(2, shape.from_standard(y), tri, analytic_source=shape, R=R)
        mesh.boundary_facets = mesh.topological_boundary_facets()
        return _finish(mesh, R, h)

    freq = max(1, ceil(shape.r / h))
    V, F = _icosphere(freq)
    mesh = DiscreteHypersurface(2, shape.from_standard(shape.r * V), F, analytic_source=shape, R=R)
    return _finish(mesh, R, h)


def _finish(mesh, R, h):
    mesh.R = R
    mesh.h = h
    return mesh


# -- differential data estimation ---------------------------------------------

def _polyline_neighbors(mesh):
    V = mesh.num_vertices
    prev = np.full(V, -1)
    nxt = np.full(V, -1)
    S = mesh.simplices
    nxt[S[:, 0]] = S[:, 1]
    prev[S[:, 1]] = S[:, 0]
    return prev, nxt


def _rot90(t):
    return np.stack([-t[:, 1], t[:, 0]], axis=1)


def _estimate_curves(mesh):
    """Turning angle over dual length at each vertex of a planar polyline."""
    X = mesh.vertices
    prev, nxt = _polyline_neighbors(mesh)
    V = len(X)
    interior = (prev >= 0) & (nxt >= 0)
    pp = np.where(prev >= 0, prev, np.arange(V))
    nn = np.where(nxt >= 0, nxt, np.arange(V))
    e1 = X - X[pp]
    e2 = X[nn] - X
    l1 = np.linalg.norm(e1, axis=1)
    l2 = np.linalg.norm(e2, axis=1)
    t1 = np.where(l1[:, None] > 0, e1 / np.where(l1 > 0, l1, 1)[:, None], 0.0)
    t2 = np.where(l2[:, None] > 0, e2 / np.where(l2 > 0, l2, 1)[:, None], 0.0)
    t = t1 + t2
    t /= np.linalg.norm(t, axis=1)[:, None]
    theta = np.arctan2(t1[:, 0] * t2[:, 1] - t1[:, 1] * t2[:, 0], np.einsum("ij,ij->i", t1, t2))
    kappa = np.where(interior, theta / (0.5 * (l1 + l2)), 0.0)
    # endpoints copy the curvature of their only neighbour
    ends = ~interior
    kappa[ends] = kappa[np.where(prev[ends] >= 0, prev[ends], nxt[ends])]
    H = kappa[:, None] * _rot90(t)
    nrm = -_rot90(t)
    return t[:, None, :], nrm, H


def _vertex_rings(mesh, rings):
    A = mesh.adjacency
    B = A.copy()
    for _ in range(rings - 1):
        B = B + B @ A
    B = B.tolil()
    B.setdiag(0)
    return B.tocsr()


def _estimate_surfaces(mesh):
    """One-ring quadric fit (two-ring near the boundary) at each vertex."""
    X = mesh.vertices
    S = mesh.simplices
    V = len(X)
    E1 = X[S[:, 1]] - X[S[:, 0]]
    E2 = X[S[:, 2]] - X[S[:, 0]]
    fn = np.cross(E1, E2)  # area weighted (x2)
    nrm = np.zeros((V, 3))
    for j in range(3):
        np.add.at(nrm, S[:, j], fn)
    count = np.bincount(S.ravel(), minlength=V)
    interior = ~mesh.boundary_vertices
    used = count > 0
    if np.any(interior & used & (count < 3)):
        bad = np.where(interior & used & (count < 3))[0][0]
        raise DegenerateStarError(f"vertex {bad} has {count[bad]} incident triangles")
    nrm[used] /= np.linalg.norm(nrm[used], axis=1)[:, None]

    one = mesh.adjacency
    two = _vertex_rings(mesh, 2)
    deg1 = np.diff(one.indptr)
    use_one = (deg1 >= 6) & interior

    # local frame
    ref = np.where(np.abs(nrm[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    f1 = np.cross(nrm, ref)
    f1 /= np.linalg.norm(f1, axis=1)[:, None]
    f2 = np.cross(nrm, f1)

    H = np.zeros((V, 3))
    frames = np.zeros((V, 2, 3))
    normals = nrm.copy()
    Ascal = np.zeros((V, 2, 2))
    for v in range(V):
        if not used[v]:
            continue
        M = one if use_one[v] else two
        nb = M.indices[M.indptr[v]:M.indptr[v + 1]]
        d = X[nb] - X[v]
        u_, v_, w_ = d @ f1[v], d @ f2[v], d @ nrm[v]
        if len(nb) >= 5:
            D = np.stack([0.5 * u_ * u_, u_ * v_, 0.5 * v_ * v_, u_, v_], axis=1)
        else:
            D = np.stack([0.5 * u_ * u_, u_ * v_, 0.5 * v_ * v_], axis=1)
        coef = np.linalg.lstsq(D, w_, rcond=None)[0]
        a, b, c = coef[:3]
        gx, gy = (coef[3], coef[4]) if len(coef) == 5 else (0.0, 0.0)
        # graph (u, v, w(u, v)): tilt normal, metric and second fundamental form
        Fu = f1[v] + gx * nrm[v]
        Fv = f2[v] + gy * nrm[v]
        nu = nrm[v] - gx * f1[v] - gy * f2[v]
        q = np.sqrt(1.0 + gx * gx + gy * gy)
        nu /= q
        Acoord = np.array([[a, b], [b, c]]) / q
        Fm = np.stack([Fu, Fv], axis=1)
        Qm, Rm = np.linalg.qr(Fm)
        Rinv = np.linalg.inv(Rm)
        Aorth = Rinv.T @ Acoord @ Rinv
        frames[v] = Qm.T
        normals[v] = nu
        Ascal[v] = Aorth
        H[v] = np.trace(Aorth) * nu
    return frames, normals, H, Ascal


def estimate_differential_data(mesh: DiscreteHypersurface) -> DifferentialData:
    """Vertex-based normal and curvature estimates.

    Polylines use turning angle over dual length, triangle meshes a
    least-squares quadric over the one-ring (two-ring for short stars and
    boundary vertices).  Both are second order on the catalog meshes.
    """
    if mesh.n == 1:
        frames, normals, H = _estimate_curves(mesh)
        kappa = np.einsum("pk,pk->p", H, normals)
        A = kappa[:, None, None, None] * normals[:, None, None, :]
    elif mesh.n == 2:
        frames, normals, H, Ascal = _estimate_surfaces(mesh)
        A = Ascal[..., None] * normals[:, None, None, :]
    else:
        raise UnsupportedDimensionError("estimation needs n in {1, 2}")
    X = mesh.vertices
    xt = np.einsum("pj,pjk->pk", np.einsum("pk,pjk->pj", X, frames), frames)
    return DifferentialData(
        points=X,
        tangent_frame=frames,
        normal_frame=normals[:, None, :],
        x_tangent=xt,
        x_normal=X - xt,
        mean_curvature_vector=H,
        second_fundamental=A,
        unit_normal=normals,
    )


def surface_data(mesh: DiscreteHypersurface, estimated=False) -> DifferentialData:
    """Differential data at the vertices: exact for catalog meshes unless ``estimated``."""
    if mesh.analytic_source is not None and not estimated:
        return catalog_differential_data(mesh.analytic_source, mesh.vertices, tol=1e-8)
    return estimate_differential_data(mesh)


@dataclass
class ResidualStats:
    max: float
    weighted_l2: float
    values: np.ndarray


def lumped_weights(mesh):
    """Vertex share of element measure (volume / (n+1)) per vertex."""
    w = np.zeros(mesh.num_vertices)
    for j in range(mesh.n + 1):
        np.add.at(w, mesh.simplices[:, j], mesh.volumes / (mesh.n + 1))
    return w


def shrinker_residual(surface, data=None, estimated=False, sign=None) -> ResidualStats:
    """Per-vertex ``|H - s x_perp / 2|`` with max and Gaussian-weighted L2 mean."""
    from .catalog import CatalogPiece

    s = SHRINKER_SIGN if sign is None else sign
    if isinstance(surface, CatalogPiece):
        pts = surface.shape.sample(1000, rng=0)
        pts = pts[np.linalg.norm(pts, axis=1) <= surface.R]
        data = catalog_differential_data(surface.shape, pts) if data is None else data
        vals = shrinker_residual_pointwise(data, sign=s)
        return ResidualStats(float(vals.max()), float(np.sqrt(np.mean(vals ** 2))), vals)
    if data is None:
        data = surface_data(surface, estimated=estimated)
    vals = shrinker_residual_pointwise(data, sign=s)
    mass = lumped_weights(surface) * np.exp(-np.einsum("ij,ij->i", surface.vertices, surface.vertices) / 4)
    wl2 = float(np.sqrt(np.sum(mass * vals ** 2) / np.sum(mass)))
    return ResidualStats(float(vals.max()), wl2, vals)
