"""Two shrinkers in a large ball must meet: the barrier argument at desk scale.

If two surfaces are disjoint in ``B_R``, the region ``Omega`` between them is
a barrier for Gaussian area.  Minimizing F over hypersurfaces in the closure
of ``Omega`` with the boundary of ``B_R`` intersected with the first surface
gives a stable piece; a firing instability certificate on that piece shows
the configuration cannot consist of two shrinkers.

Curves (``n = 1``) are fully supported.  For ``n = 2`` the minimization is
restricted to graphs over the ``x_3 = 0`` plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi, sqrt

import numpy as np
from scipy import sparse
from scipy.interpolate import LinearNDInterpolator
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .certificates import certify_instability
from .errors import (
    CoreBallError,
    DimensionMismatchError,
    InfeasibleBoundaryError,
    PreconditionError,
    UnsupportedDimensionError,
)
from .geometry import (
    closest_points_segments,
    point_segment_distance,
    segment_triangle_intersect,
    segments_intersect_2d,
    triangles_intersect,
)
from .mesh import DiscreteHypersurface, polyline

__all__ = [
    "intersection_test",
    "SegmentResult",
    "find_segment",
    "FrankelProblem",
    "ObstacleMinimizer",
    "discrete_F",
    "minimize_F_obstacle",
    "Intersect",
    "DisjointEvidence",
    "frankel_verdict",
]


def _check_pair(S1, S2):
    for S in (S1, S2):
        if S.n not in (1, 2) or S.N != S.n + 1:
            raise DimensionMismatchError(f"need hypersurfaces with n in (1, 2), got n={S.n} in R^{S.N}")
    if S1.n != S2.n:
        raise DimensionMismatchError(f"dimensions differ: {S1.n} and {S2.n}")


def _candidate_pairs(P1, P2):
    """Simplex pairs whose bounding spheres overlap."""
    c1, c2 = P1.mean(axis=1), P2.mean(axis=1)
    r1 = np.linalg.norm(P1 - c1[:, None], axis=2).max(axis=1)
    r2 = np.linalg.norm(P2 - c2[:, None], axis=2).max(axis=1)
    t1, t2 = cKDTree(c1), cKDTree(c2)
    reach = float(r1.max(initial=0) + r2.max(initial=0)) * (1 + 1e-9) + 1e-12
    pairs = t1.query_ball_tree(t2, reach)
    I = np.array([i for i, js in enumerate(pairs) for _ in js], dtype=int)
    J = np.array([j for js in pairs for j in js], dtype=int)
    if len(I) == 0:
        return I, J
    d = np.linalg.norm(c1[I] - c2[J], axis=1)
    keep = d <= (r1[I] + r2[J]) * (1 + 1e-9) + 1e-12
    return I[keep], J[keep]


def intersection_test(S1: DiscreteHypersurface, S2: DiscreteHypersurface, R=np.inf):
    """Exactly intersecting simplex pairs inside the closed ball ``B_R``.

    Returns a list of ``(i, j, point)`` with ``i`` a simplex of ``S1`` and
    ``j`` one of ``S2``; an empty list means no intersection at mesh
    resolution.
    """
    _check_pair(S1, S2)
    P1 = S1.vertices[S1.simplices]
    P2 = S2.vertices[S2.simplices]
    if len(P1) == 0 or len(P2) == 0:
        return []
    I, J = _candidate_pairs(P1, P2)
    if len(I) == 0:
        return []
    if S1.n == 1:
        hit, pt = segments_intersect_2d(P1[I, 0], P1[I, 1], P2[J, 0], P2[J, 1])
    else:
        hit, pt = triangles_intersect(P1[I], P2[J])
    hit &= np.linalg.norm(pt, axis=1) <= R * (1 + 1e-12)
    return [(int(i), int(j), p) for i, j, p in zip(I[hit], J[hit], pt[hit])]


# -- connecting segment -------------------------------------------------------------

@dataclass
class SegmentResult:
    segment: np.ndarray | None
    witnesses: list = field(default_factory=list)

    @property
    def intersects(self):
        return self.segment is None


def _distance_to_origin(S):
    P = S.vertices[S.simplices]
    if S.n == 1:
        d, _ = point_segment_distance(np.zeros((1, S.N)), P[:, 0], P[:, 1])
        return float(d.min(initial=np.inf))
    return float(np.linalg.norm(S.vertices, axis=1).min(initial=np.inf))


def _needs_core_check(S):
    src = S.analytic_source
    return src is None or src.is_shrinker


def find_segment(S1: DiscreteHypersurface, S2: DiscreteHypersurface, candidates=32) -> SegmentResult:
    """Straight segment from ``S1`` to ``S2`` with interior disjoint from both.

    Endpoints are nearest-point representatives inside the closed ball of
    radius ``sqrt(2n)``.  Surfaces that miss that ball violate a property
    every shrinker has and are rejected, except catalog test doubles that
    are declared non-shrinkers; for those the nearest pair overall is used.
    """
    _check_pair(S1, S2)
    n = S1.n
    core = sqrt(2 * n)
    dist = [_distance_to_origin(S) for S in (S1, S2)]
    for S, d in zip((S1, S2), dist):
        if d > core + 1e-9 and _needs_core_check(S):
            raise CoreBallError(f"surface stays at distance {d:.6g} > sqrt(2n) = {core:.6g} from the origin")
    wit = intersection_test(S1, S2)
    if wit:
        return SegmentResult(None, wit)
    # test doubles that miss the core ball get an unrestricted search
    rad = core + 1e-9 if max(dist) <= core + 1e-9 else np.inf

    if n == 1:
        P1, P2 = (S.vertices[S.simplices] for S in (S1, S2))
        I, J = np.meshgrid(np.arange(len(P1)), np.arange(len(P2)), indexing="ij")
        I, J = I.ravel(), J.ravel()
        A, B, d = closest_points_segments(P1[I, 0], P1[I, 1], P2[J, 0], P2[J, 1])
    else:
        t2 = cKDTree(S2.vertices)
        d, J = t2.query(S1.vertices)
        A, B = S1.vertices, S2.vertices[J]
    ok = (np.linalg.norm(A, axis=1) <= rad) & (np.linalg.norm(B, axis=1) <= rad)
    order = np.argsort(np.where(ok, d, np.inf))[:candidates]
    for c in order:
        if not ok[c]:
            break
        seg = np.array([A[c], B[c]])
        if _segment_interior_clear(seg, S1, S2):
            return SegmentResult(seg)
    return SegmentResult(None, wit)


def _segment_interior_clear(seg, S1, S2, samples=32):
    a, b = seg
    if np.linalg.norm(b - a) == 0:
        return False
    # shrink slightly so touching endpoints are not counted
    e = 1e-6 * (b - a)
    p, q = a + e, b - e
    for S in (S1, S2):
        P = S.vertices[S.simplices]
        m = len(P)
        if S.n == 1:
            hit, _ = segments_intersect_2d(np.repeat(p[None], m, 0), np.repeat(q[None], m, 0), P[:, 0], P[:, 1])
        else:
            hit, _ = segment_triangle_intersect(np.repeat(p[None], m, 0), np.repeat(q[None], m, 0),
                                                P[:, 0], P[:, 1], P[:, 2])
        if np.any(hit):
            return False
    return True


# -- the obstacle problem -------------------------------------------------------------

class _PolylineDistance:
    """Signed distance to a polyline with angle-free vertex pseudo-normals."""

    def __init__(self, S: DiscreteHypersurface):
        self.S = S
        P = S.vertices[S.simplices]
        self.a, self.b = P[:, 0], P[:, 1]
        t = self.b - self.a
        t /= np.linalg.norm(t, axis=1)[:, None]
        self.nrm = np.stack([-t[:, 1], t[:, 0]], axis=1)
        vn = np.zeros_like(S.vertices)
        for k in (0, 1):
            np.add.at(vn, S.simplices[:, k], self.nrm)
        self.vnrm = vn / np.maximum(np.linalg.norm(vn, axis=1), 1e-300)[:, None]

    def query(self, X):
        """Signed distance, closest point and the normal used for the sign."""
        d, t = point_segment_distance(X, self.a, self.b)
        s = np.argmin(d, axis=1)
        ts = t[np.arange(len(X)), s]
        foot = self.a[s] + ts[:, None] * (self.b[s] - self.a[s])
        nrm = self.nrm[s].copy()
        at0, at1 = ts <= 1e-12, ts >= 1 - 1e-12
        nrm[at0] = self.vnrm[self.S.simplices[s[at0], 0]]
        nrm[at1] = self.vnrm[self.S.simplices[s[at1], 1]]
        sd = np.einsum("ij,ij->i", X - foot, nrm)
        dist = np.linalg.norm(X - foot, axis=1)
        return np.where(sd >= 0, dist, -dist), foot, nrm


@dataclass
class FrankelProblem:
    """Two disjoint surfaces, a ball and the barrier region between them.

    ``Omega`` is the part of ``B_R`` on the side of each surface that
    contains the midpoint of the connecting segment.
    """

    sigma1: DiscreteHypersurface
    sigma2: DiscreteHypersurface
    R: float
    segment: np.ndarray

    def __post_init__(self):
        _check_pair(self.sigma1, self.sigma2)
        self.segment = np.asarray(self.segment, dtype=float)
        n = self.sigma1.n
        core = sqrt(2 * n)
        for S in (self.sigma1, self.sigma2):
            if _distance_to_origin(S) > self.R:
                raise PreconditionError("both surfaces must meet B_R")
        if np.linalg.norm(self.segment, axis=1).max() > max(core, self.R) + 1e-9:
            raise PreconditionError("segment leaves the ball")
        if n == 1:
            self._dist = [_PolylineDistance(S) for S in (self.sigma1, self.sigma2)]
            mid = self.segment.mean(axis=0, keepdims=True)
            self.sides = np.array([np.sign(D.query(mid)[0][0]) for D in self._dist])
            if np.any(self.sides == 0):
                raise PreconditionError("segment midpoint lies on a surface")

    @property
    def n(self):
        return self.sigma1.n

    def signed(self, X):
        """Signed distances with Omega on the positive side of both surfaces."""
        out = []
        for D, sg in zip(self._dist, self.sides):
            sd, foot, nrm = D.query(X)
            out.append((sg * sd, foot, sg * nrm))
        return out

    def inside(self, X, tol=1e-9):
        ok = np.linalg.norm(X, axis=1) <= self.R + tol
        for sd, _, _ in self.signed(X):
            ok &= sd >= -tol
        return ok

    def project(self, X, fixed=None):
        """Map points into the closure of Omega (obstacle feet, then radial clamp)."""
        X = np.array(X, dtype=float)
        for _ in range(3):
            for sd, foot, _ in self.signed(X):
                bad = sd < 0
                if fixed is not None:
                    bad &= ~fixed
                X[bad] = foot[bad]
            r = np.linalg.norm(X, axis=1)
            out = r > self.R
            if fixed is not None:
                out &= ~fixed
            X[out] *= (self.R / r[out])[:, None]
        return X


def _rule(n):
    """Barycentric points and weights: 4-point Gauss on segments, the 3-point rule on triangles.

    Vertex-only rules let a descent hide long simplices in low-weight
    regions, so interior points are used.
    """
    if n == 1:
        x, w = np.polynomial.legendre.leggauss(4)
        s = 0.5 * (x + 1)
        return np.stack([1 - s, s], axis=1), 0.5 * w
    B = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
    return B, np.full(3, 1 / 3)


def _volume_and_grad(P):
    """Simplex volumes and their gradients with respect to each vertex."""
    if P.shape[1] == 2:
        e = P[:, 1] - P[:, 0]
        L = np.linalg.norm(e, axis=1)
        u = e / np.maximum(L, 1e-300)[:, None]
        return L, np.stack([-u, u], axis=1)
    c = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    A2 = np.linalg.norm(c, axis=1)
    nu = c / np.maximum(A2, 1e-300)[:, None]
    dV = np.stack([0.5 * np.cross(nu, P[:, (i + 2) % 3] - P[:, (i + 1) % 3]) for i in range(3)], axis=1)
    return 0.5 * A2, dV


def discrete_F(X, simplices):
    """Gaussian area of a polyline or triangle mesh with vertex positions ``X``."""
    n = simplices.shape[1] - 1
    B, wq = _rule(n)
    P = X[simplices]
    vol, _ = _volume_and_grad(P)
    Q = np.einsum("qa,sak->sqk", B, P)
    phi = np.exp(-np.sum(Q * Q, axis=2) / 4.0)
    return float((4 * pi) ** (-n / 2) * np.sum(vol * (phi @ wq)))


def discrete_F_gradient(X, simplices):
    n = simplices.shape[1] - 1
    B, wq = _rule(n)
    P = X[simplices]
    vol, dvol = _volume_and_grad(P)
    Q = np.einsum("qa,sak->sqk", B, P)
    phi = np.exp(-np.sum(Q * Q, axis=2) / 4.0)
    avg = phi @ wq
    # d/dP_a of phi(Q_q) = B[q, a] * (-Q_q / 2) phi
    dphi = np.einsum("q,qa,sqk->sak", wq, B, -0.5 * Q * phi[..., None])
    local = dvol * avg[:, None, None] + vol[:, None, None] * dphi
    G = np.zeros_like(X)
    for a in range(n + 1):
        np.add.at(G, simplices[:, a], local[:, a])
    return (4 * pi) ** (-n / 2) * G


@dataclass
class ObstacleMinimizer:
    """Result of the obstacle-constrained descent.

    ``contact`` has one column per obstacle: first surface, second surface
    and the ball boundary.
    """

    gamma: DiscreteHypersurface
    contact: np.ndarray
    F: float
    F_initial: float
    residual: float
    iterations: int
    converged: bool
    history: np.ndarray
    complementarity: float
    fixed: np.ndarray

    def monotone(self):
        return bool(np.all(np.diff(self.history) <= 1e-15 * max(1.0, self.F_initial)))


def _clip_polyline(S: DiscreteHypersurface, R):
    """Components of the polyline inside ``B_R`` with exact crossing endpoints."""
    X = S.vertices
    order = _polyline_order(S)
    pieces, cur = [], []
    closed = S.simplices.shape[0] == len(order) and len(order) > 2 and _is_closed(S)
    inside = np.linalg.norm(X, axis=1) <= R
    if closed and np.all(inside[order]):
        return [(X[order], True)]
    seq = list(order) + ([order[0]] if closed else [])
    for a, b in zip(seq[:-1], seq[1:]):
        ia, ib = inside[a], inside[b]
        if ia:
            if not cur:
                cur.append(X[a])
        if ia and ib:
            cur.append(X[b])
        elif ia != ib:
            d = X[b] - X[a]
            A, B, C = d @ d, 2 * X[a] @ d, X[a] @ X[a] - R * R
            s = (-B + np.sqrt(max(B * B - 4 * A * C, 0))) / (2 * A) if ia else \
                (-B - np.sqrt(max(B * B - 4 * A * C, 0))) / (2 * A)
            p = X[a] + s * d
            if ia:
                cur.append(p)
                pieces.append((np.array(cur), False))
                cur = []
            else:
                cur = [p, X[b]]
    if cur:
        pieces.append((np.array(cur), False))
    return pieces


def _is_closed(S):
    deg = np.bincount(S.simplices.ravel(), minlength=S.num_vertices)
    return bool(np.all(deg[np.unique(S.simplices)] == 2))


def _polyline_order(S):
    """Vertex order of a single connected polyline."""
    nxt = {int(a): int(b) for a, b in S.simplices}
    prv = {b: a for a, b in nxt.items()}
    start = next((a for a in nxt if a not in prv), int(S.simplices[0, 0]))
    order, v = [start], start
    while v in nxt and nxt[v] != start and len(order) <= len(nxt):
        v = nxt[v]
        order.append(v)
    return order


def _h1_solve(X, simplices, fixed, G):
    """Sobolev gradient: solve ``(M + K) D = G`` on free vertices."""
    V = len(X)
    P = X[simplices]
    if simplices.shape[1] == 2:
        L = np.maximum(np.linalg.norm(P[:, 1] - P[:, 0], axis=1), 1e-12)
        i, j = simplices[:, 0], simplices[:, 1]
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([i, j, j, i])
        vals = np.concatenate([1 / L, 1 / L, -1 / L, -1 / L])
        mass = np.zeros(V)
        np.add.at(mass, i, L / 2)
        np.add.at(mass, j, L / 2)
    else:
        from .geometry import barycentric_gradients, simplex_volumes

        vol = simplex_volumes(X, simplices)
        g = barycentric_gradients(X, simplices)
        loc = np.einsum("s,sak,sbk->sab", vol, g, g)
        rows = np.repeat(simplices, 3, axis=1).ravel()
        cols = np.tile(simplices, (1, 3)).ravel()
        vals = loc.ravel()
        mass = np.zeros(V)
        for k in range(3):
            np.add.at(mass, simplices[:, k], vol / 3)
    K = sparse.coo_matrix((vals, (rows, cols)), shape=(V, V)).tocsr()
    A = K + sparse.diags(np.maximum(mass, 1e-12))
    free = np.where(~fixed)[0]
    D = np.zeros_like(G)
    if len(free):
        Af = sparse.csc_matrix(A[free][:, free])
        sol = spsolve(Af, G[free])
        D[free] = sol.reshape(len(free), -1)
    return D


def _cone_project(s, normals):
    """Nearest point to ``s`` in the cone ``{d : <d, nu> <= 0 for all nu}`` (2-D)."""
    if not normals:
        return s
    best, bestd = np.zeros_like(s), float(s @ s)
    if all(s @ nu <= 0 for nu in normals):
        return s
    for nu in normals:
        d = s - max(0.0, float(s @ nu)) * nu
        if all(d @ mu <= 1e-15 * np.linalg.norm(s) for mu in normals):
            dist = float((d - s) @ (d - s))
            if dist < bestd:
                best, bestd = d, dist
    return best


def _constraint_sets(problem, X, tol):
    """Per-point groups of outward normals; a point must satisfy one choice per group."""
    V = len(X)
    groups = [[] for _ in range(V)]
    contact = np.zeros((V, 3), dtype=bool)
    for k, (D, sg) in enumerate(zip(problem._dist, problem.sides)):
        d, t = point_segment_distance(X, D.a, D.b)
        near = d <= tol
        contact[:, k] = near.any(axis=1)
        for p in np.where(contact[:, k])[0]:
            segs = np.where(near[p])[0]
            nus = [-sg * D.nrm[q] for q in segs]
            if len(segs) == 2:
                # corner: Omega is the wedge (convex) or the union of half-planes (reflex)
                a0, a1 = D.a[segs[0]], D.b[segs[0]]
                other = D.b[segs[1]] if np.allclose(D.a[segs[1]], a1) or np.allclose(D.a[segs[1]], a0) \
                    else D.a[segs[1]]
                convex = float((other - a0) @ (sg * D.nrm[segs[0]])) > 0
                if convex:
                    groups[p].extend([[nu] for nu in nus])
                else:
                    groups[p].append(nus)
            else:
                groups[p].extend([[nu] for nu in nus])
    r = np.linalg.norm(X, axis=1)
    contact[:, 2] = r >= problem.R - tol
    for p in np.where(contact[:, 2])[0]:
        groups[p].append([X[p] / r[p]])
    return contact, groups


def _feasible(problem, X, G, fixed, tol):
    """Contact flags, the tangent-cone projection of ``-G`` and the outward push.

    ``push`` is the largest outward component of ``-G`` over the active
    constraints; complementarity asks it to be nonnegative.
    """
    contact, groups = _constraint_sets(problem, X, tol)
    step = -G.copy()
    push = np.zeros(len(X))
    for p in np.where(contact.any(axis=1) & ~fixed)[0]:
        s = step[p]
        push[p] = max(float(s @ nu) for grp in groups[p] for nu in grp)
        best, bestd = None, np.inf
        for choice in _choices(groups[p]):
            d = _cone_project(s, choice)
            dist = float((d - s) @ (d - s))
            if dist < bestd:
                best, bestd = d, dist
        step[p] = best
    step[fixed] = 0.0
    return contact, step, push


def _choices(groups):
    out = [[]]
    for grp in groups:
        out = [c + [nu] for c in out for nu in grp]
    return out


def _cone_field(D, groups, fixed):
    """Project each vector of ``D`` onto the tangent cone of its active constraints."""
    D = D.copy()
    for p, grp in enumerate(groups):
        if grp and not fixed[p]:
            best, bestd = None, np.inf
            for choice in _choices(grp):
                d = _cone_project(D[p], choice)
                dist = float((d - D[p]) @ (d - D[p]))
                if dist < bestd:
                    best, bestd = d, dist
            D[p] = best
    D[fixed] = 0.0
    return D


def _line_search(X, F, D, S, step0, project):
    """Backtracking from a largest vertex displacement of ``step0``; ``None`` if F never drops."""
    dmax = float(np.abs(D).max())
    if dmax == 0:
        return None
    tau = step0 / dmax
    while tau * dmax > 1e-14:
        Y = project(X + tau * D)
        FY = discrete_F(Y, S)
        if FY < F:
            return Y, FY, tau * dmax
        tau *= 0.5
    return None


def minimize_F_obstacle(problem: FrankelProblem, boundary=None, h=None, max_iter=3000, tol=1e-6,
                        initial=None, nudge=0.25):
    """Projected Sobolev-gradient descent of F in the closure of Omega.

    The curve starts from the first surface clipped to ``B_R`` (its component
    meeting the connecting segment), nudged a fraction ``nudge * h`` into
    Omega so the descent leaves the first surface when that surface is a
    critical point.  Each step starts at a maximal vertex displacement of
    ``h/2`` and halves until F decreases.  The run stops when the feasible
    first-variation norm drops below ``tol * F``.

    Raises
    ------
    UnsupportedDimensionError
        For ``n = 2`` (use :func:`minimize_F_graph`).
    InfeasibleBoundaryError
        If the fixed boundary leaves the closure of Omega.
    """
    if problem.n != 1:
        raise UnsupportedDimensionError("polyline minimization needs n = 1; use minimize_F_graph")
    if initial is None:
        pieces = _clip_polyline(problem.sigma1, problem.R)
        pts, closed = _pick_piece(pieces, problem.segment)
    else:
        pts, closed = initial
    pts = np.array(pts, dtype=float)
    gamma = polyline(pts, closed=closed, boundary_radius=problem.R)
    S = gamma.simplices
    fixed = gamma.boundary_vertices.copy()
    if boundary is not None:
        b = np.atleast_2d(boundary)
        if len(b) != fixed.sum() or not np.allclose(np.sort(b, axis=0), np.sort(pts[fixed], axis=0)):
            raise InfeasibleBoundaryError("boundary must be the endpoints of the clipped first surface")
    if np.any(~problem.inside(pts[fixed], tol=1e-7)):
        raise InfeasibleBoundaryError("boundary data leave the closure of Omega")
    seglen = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    h = float(np.median(seglen)) if h is None and len(seglen) else (h or 1e-3)
    X = pts.copy()
    if nudge and len(X) > 2:
        sd, foot, nrm = problem.signed(X)[0]
        X[~fixed] += nudge * h * nrm[~fixed]
        X = problem.project(X, fixed)
    F0 = discrete_F(pts, S)
    F = discrete_F(X, S)
    if F > F0:
        X, F = pts.copy(), F0
    hist = [F0] + ([F] if F != F0 else [])
    ctol = 1e-9 * max(1.0, problem.R)
    res, it, step0 = np.inf, 0, 0.5 * h
    contact = np.zeros((len(X), 3), dtype=bool)
    push = np.zeros(len(X))
    for it in range(1, max_iter + 1):
        G = discrete_F_gradient(X, S)
        contact, step_dir, push = _feasible(problem, X, G, fixed, ctol)
        res = float(np.linalg.norm(step_dir))
        if res <= tol * max(F, 1e-300):
            break
        D = _h1_solve(X, S, fixed, step_dir)
        _, groups = _constraint_sets(problem, X, ctol)
        D = _cone_field(D, groups, fixed)
        moved = None
        # smoothed direction first, the raw feasible gradient as fallback
        for Dir in (D, step_dir):
            moved = _line_search(X, F, Dir, S, step0, lambda Y: problem.project(Y, fixed))
            if moved is not None:
                break
        if moved is None:
            break
        X, F, disp = moved
        hist.append(F)
        step0 = min(0.5 * h, 4 * disp)
    G = discrete_F_gradient(X, S)
    contact, step_dir, push = _feasible(problem, X, G, fixed, ctol)
    res = float(np.linalg.norm(step_dir))
    out = polyline(X, closed=closed, boundary_radius=problem.R)
    out.h = h
    comp = float(np.min(push[contact.any(axis=1) & ~fixed], initial=0.0))
    return ObstacleMinimizer(out, contact, F, F0, res, it, bool(res <= tol * max(F, 1e-300)),
                             np.array(hist), comp, fixed)


def _pick_piece(pieces, segment):
    if len(pieces) == 1:
        return pieces[0]
    a = segment[0]
    best = min(pieces, key=lambda pc: np.min(np.linalg.norm(pc[0] - a, axis=1)))
    return best


def gamma_component(minimizer: ObstacleMinimizer, segment, R):
    """Component of ``Gamma`` inside the open ball that meets the segment, as a polyline."""
    g = minimizer.gamma
    X = g.vertices
    S = g.simplices
    mid = 0.5 * (X[S[:, 0]] + X[S[:, 1]])
    interior = np.linalg.norm(mid, axis=1) < R - 1e-9
    # runs of consecutive interior segments
    runs, cur = [], []
    for s in range(len(S)):
        if interior[s]:
            cur.append(s)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        if runs and interior[0] and _is_closed(g) and runs[0][0] == 0:
            runs[0] = cur + runs[0]
        else:
            runs.append(cur)
    a, b = np.asarray(segment)
    for run in runs:
        P = X[S[run]]
        m = len(run)
        hit, _ = segments_intersect_2d(np.repeat(a[None], m, 0), np.repeat(b[None], m, 0), P[:, 0], P[:, 1])
        if np.any(hit):
            closed = len(run) == len(S) and _is_closed(g)
            verts = [S[run[0], 0]] + [S[s, 1] for s in run]
            if closed:
                verts = verts[:-1]
            return polyline(X[verts], closed=closed, boundary_radius=R)
    return None


# -- n = 2 graph-type obstacle problem ----------------------------------------------------

def minimize_F_graph(S1: DiscreteHypersurface, S2: DiscreteHypersurface, R, h=None, max_iter=2000, tol=1e-6):
    """Obstacle descent for graphs over the ``x_3 = 0`` plane (n = 2).

    ``Gamma`` keeps the connectivity of ``S1`` clipped to the disk of radius
    ``R``, moves vertices vertically and stays between the two graphs.  The
    horizontal boundary vertices are fixed.
    """
    _check_pair(S1, S2)
    if S1.n != 2:
        raise UnsupportedDimensionError("graph-type minimization needs n = 2")
    for S in (S1, S2):
        P = S.vertices[S.simplices]
        nz = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])[:, 2]
        if np.any(np.abs(nz) < 1e-14):
            raise UnsupportedDimensionError("surfaces must be graphs over the x3 = 0 plane")
    X0 = S1.vertices.copy()
    interp = LinearNDInterpolator(S2.vertices[:, :2], S2.vertices[:, 2])
    g2 = interp(X0[:, :2])
    if np.any(np.isnan(g2)):
        raise PreconditionError("second graph does not cover the first one's domain")
    upper = g2 > X0[:, 2]
    lo = np.where(upper, X0[:, 2], g2)
    hi = np.where(upper, g2, X0[:, 2])
    fixed = S1.boundary_vertices | (np.linalg.norm(X0, axis=1) > R)
    Smp = S1.simplices
    seglen = np.linalg.norm(X0[S1.edges[:, 0]] - X0[S1.edges[:, 1]], axis=1)
    h = float(np.median(seglen)) if h is None else h
    X = X0.copy()
    F0 = discrete_F(X, Smp)
    F = F0
    hist = [F]
    res, it = np.inf, 0
    step0 = 0.5 * h
    for it in range(1, max_iter + 1):
        G = discrete_F_gradient(X, Smp)[:, 2]
        d = -G
        at_lo = X[:, 2] <= lo + 1e-12
        at_hi = X[:, 2] >= hi - 1e-12
        d[(at_lo & (d < 0)) | (at_hi & (d > 0)) | fixed] = 0.0
        res = float(np.linalg.norm(d))
        if res <= tol * max(F, 1e-300):
            break
        D = _h1_solve(X, Smp, fixed, d[:, None])[:, 0]
        # keep the smoothed direction in the tangent cone of the active bounds
        D[(at_lo & (D < 0)) | (at_hi & (D > 0)) | fixed] = 0.0
        accepted = False
        for Dir in (D, d):
            dmax = float(np.abs(Dir).max())
            if dmax == 0:
                continue
            tau = step0 / dmax
            while tau * dmax > 1e-13:
                Y = X.copy()
                Y[:, 2] = np.clip(X[:, 2] + tau * Dir, lo, hi)
                Y[fixed] = X[fixed]
                FY = discrete_F(Y, Smp)
                if FY < F:
                    X, F, accepted = Y, FY, True
                    break
                tau *= 0.5
            if accepted:
                break
        if not accepted:
            break
        hist.append(F)
        step0 = min(0.5 * h, 4 * tau * dmax)
    contact = np.zeros((len(X), 3), dtype=bool)
    contact[:, 0] = X[:, 2] <= lo + 1e-12
    contact[:, 1] = X[:, 2] >= hi - 1e-12
    out = DiscreteHypersurface(2, X, Smp, S1.boundary_facets, R=S1.R, h=h)
    G = discrete_F_gradient(X, Smp)[:, 2]
    push = np.where(contact[:, 0], G, np.where(contact[:, 1], -G, 0.0))
    comp = float(np.min(push[(contact[:, 0] | contact[:, 1]) & ~fixed], initial=0.0))
    return ObstacleMinimizer(out, contact, F, F0, res, it, bool(res <= tol * max(F, 1e-300)),
                             np.array(hist), comp, fixed)


# -- verdicts ----------------------------------------------------------------------------

@dataclass
class Intersect:
    witnesses: list

    verdict = "Intersect"

    def to_json(self):
        return {
            "verdict": self.verdict,
            "witnesses": [[i, j, [float(x) for x in p]] for i, j, p in self.witnesses],
            "F_gamma": None,
            "certificate": None,
        }


@dataclass
class DisjointEvidence:
    segment: np.ndarray
    minimizer: ObstacleMinimizer
    gamma1: DiscreteHypersurface | None
    certificate: object | None

    verdict = "DisjointEvidence"

    def to_json(self):
        cert = None
        if self.certificate is not None:
            c = self.certificate
            cert = {"mass": c.mass, "energy": c.energy, "margin": c.margin, "fires": c.fires}
        return {
            "verdict": self.verdict,
            "witnesses": [],
            "F_gamma": self.minimizer.F,
            "segment": self.segment.tolist(),
            "certificate": cert,
        }


def frankel_verdict(S1: DiscreteHypersurface, S2: DiscreteHypersurface, R, r2=None, **kwargs):
    """Intersect with witnesses, or the minimizer with an instability certificate.

    The certificate uses ``r1 = sqrt(4 + 2n)`` and ``r2 = R`` unless ``r2`` is
    given; it is omitted when ``R <= r1 + 1``.
    """
    _check_pair(S1, S2)
    wit = intersection_test(S1, S2, R)
    if wit:
        return Intersect(wit)
    seg = find_segment(S1, S2)
    if seg.intersects:
        return Intersect(seg.witnesses)
    n = S1.n
    if n == 1:
        problem = FrankelProblem(S1, S2, R, seg.segment)
        mini = minimize_F_obstacle(problem, **kwargs)
        gamma1 = gamma_component(mini, seg.segment, R)
    else:
        mini = minimize_F_graph(S1, S2, R, **kwargs)
        gamma1 = mini.gamma
    r1 = sqrt(4 + 2 * n)
    r2 = R if r2 is None else r2
    cert = None
    if gamma1 is not None and r2 > r1 + 1 + 1e-12:
        gamma1.R = max(gamma1.R or R, r2)
        cert = certify_instability(gamma1, r1, r2)
    return DisjointEvidence(seg.segment, mini, gamma1, cert)
