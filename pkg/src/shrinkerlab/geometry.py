"""Vectorized geometric kernels: simplex measures, ball clipping, exact predicates."""

from __future__ import annotations

import numpy as np

__all__ = [
    "simplex_volumes",
    "barycentric_gradients",
    "segment_ball_length",
    "triangle_ball_area",
    "triangle_sphere_arcs",
    "segment_sphere_points",
    "segments_intersect_2d",
    "segment_triangle_intersect",
    "triangles_intersect",
    "point_segment_distance",
    "closest_points_segments",
]


def simplex_volumes(vertices, simplices):
    """n-dimensional volume of every simplex (Gram determinant)."""
    V = np.asarray(vertices, dtype=float)
    S = np.asarray(simplices)
    if len(S) == 0:
        return np.zeros(0)
    n = S.shape[1] - 1
    E = V[S[:, 1:]] - V[S[:, :1]]  # (s, n, N)
    G = E @ np.transpose(E, (0, 2, 1))
    det = np.linalg.det(G)
    fact = float(np.prod(np.arange(1, n + 1)))
    return np.sqrt(np.maximum(det, 0.0)) / fact


def barycentric_gradients(vertices, simplices):
    """Gradients of the P1 hat functions on each simplex, shape (s, n+1, N)."""
    V = np.asarray(vertices, dtype=float)
    S = np.asarray(simplices)
    E = V[S[:, 1:]] - V[S[:, :1]]  # (s, n, N)
    G = E @ np.transpose(E, (0, 2, 1))
    grads = np.linalg.solve(G, E)  # rows: gradients of lambda_1..lambda_n
    g0 = -grads.sum(axis=1, keepdims=True)
    return np.concatenate([g0, grads], axis=1)


# -- ball clipping ----------------------------------------------------------

def _segment_ball_params(a, b, r):
    """Parameters s in [0, 1] bounding the part of a->b inside the ball."""
    d = b - a
    A = np.einsum("ij,ij->i", d, d)
    B = 2.0 * np.einsum("ij,ij->i", a, d)
    C = np.einsum("ij,ij->i", a, a) - r * r
    disc = B * B - 4.0 * A * C
    ok = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    safeA = np.where(A > 0, A, 1.0)
    s1 = np.where(ok, (-B - sq) / (2 * safeA), 1.0)
    s2 = np.where(ok, (-B + sq) / (2 * safeA), 1.0)
    return np.clip(s1, 0.0, 1.0), np.clip(s2, 0.0, 1.0)


def segment_ball_length(a, b, r):
    """Length of each segment a->b inside the closed ball of radius r about 0."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    s1, s2 = _segment_ball_params(a, b, r)
    return (s2 - s1) * np.linalg.norm(b - a, axis=1)


def _cross2(p, q):
    return p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]


def _edge_disk_area(a, b, rho):
    """Signed area of triangle (0, a, b) intersected with the disk of radius rho (2-D)."""
    s1, s2 = _segment_ball_params(a, b, rho)
    d = b - a
    p1 = a + s1[:, None] * d
    p2 = a + s2[:, None] * d

    def arc(p, q):
        ang = np.arctan2(_cross2(p, q), np.einsum("ij,ij->i", p, q))
        # a vertex at the centre has no direction; its sector is empty
        tiny = 1e-12 * np.maximum(rho, 1e-300)
        ang = np.where((np.linalg.norm(p, axis=1) < tiny) | (np.linalg.norm(q, axis=1) < tiny), 0.0, ang)
        return 0.5 * rho * rho * ang

    return arc(a, p1) + 0.5 * _cross2(p1, p2) + arc(p2, b)


def triangle_ball_area(tri, r):
    """Area of each triangle (s, 3, N) inside the closed ball of radius r about 0."""
    tri = np.asarray(tri, dtype=float)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = b - a
    e2 = c - a
    u = e1 / np.linalg.norm(e1, axis=1)[:, None]
    w = e2 - np.einsum("ij,ij->i", e2, u)[:, None] * u
    v = w / np.linalg.norm(w, axis=1)[:, None]
    # projection of the origin onto the plane of the triangle
    o = a - np.einsum("ij,ij->i", a, u)[:, None] * u - np.einsum("ij,ij->i", a, v)[:, None] * v
    rho2 = r * r - np.einsum("ij,ij->i", o, o)
    rho = np.sqrt(np.maximum(rho2, 0.0))
    loc = [np.stack([np.einsum("ij,ij->i", P - o, u), np.einsum("ij,ij->i", P - o, v)], axis=1)
           for P in (a, b, c)]
    area = np.zeros(len(tri))
    for P, Q in ((loc[0], loc[1]), (loc[1], loc[2]), (loc[2], loc[0])):
        area += _edge_disk_area(P, Q, rho)
    area = np.abs(area)
    area[rho2 <= 0] = 0.0
    return area


def segment_sphere_points(a, b, r):
    """Points where segments a->b cross the sphere |x| = r (list per segment).

    Endpoints are classified as inside (``|x| < r``) or not, so a crossing
    at a shared vertex is reported by exactly one of its two segments.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d = b - a
    A = np.einsum("ij,ij->i", d, d)
    B = 2.0 * np.einsum("ij,ij->i", a, d)
    C = np.einsum("ij,ij->i", a, a) - r * r
    disc = B * B - 4 * A * C
    ina = np.linalg.norm(a, axis=1) < r
    inb = np.linalg.norm(b, axis=1) < r
    out = []
    for i in range(len(a)):
        pts = []
        if disc[i] >= 0 and A[i] > 0:
            sq = np.sqrt(disc[i])
            s1, s2 = (-B[i] - sq) / (2 * A[i]), (-B[i] + sq) / (2 * A[i])
            if ina[i] and not inb[i]:
                pts.append(a[i] + np.clip(s2, 0.0, 1.0) * d[i])
            elif inb[i] and not ina[i]:
                pts.append(a[i] + np.clip(s1, 0.0, 1.0) * d[i])
            elif not ina[i] and 0.0 < s1 < s2 < 1.0:
                pts.extend([a[i] + s1 * d[i], a[i] + s2 * d[i]])
        out.append(pts)
    return out


def triangle_sphere_arcs(tri, r):
    """Arcs of the circle (sphere |x| = r) meet (plane of triangle) inside each triangle.

    Returns a list of ``(o, u, v, rho, [(theta0, theta1), ...])`` per triangle
    where the arc points are ``o + rho (cos t u + sin t v)``.
    """
    tri = np.asarray(tri, dtype=float)
    out = []
    for T in tri:
        a, b, c = T
        e1, e2 = b - a, c - a
        u = e1 / np.linalg.norm(e1)
        w = e2 - (e2 @ u) * u
        v = w / np.linalg.norm(w)
        o = a - (a @ u) * u - (a @ v) * v
        rho2 = r * r - o @ o
        if rho2 <= 0:
            out.append((o, u, v, 0.0, []))
            continue
        rho = np.sqrt(rho2)
        P = np.array([[(X - o) @ u, (X - o) @ v] for X in (a, b, c)])
        angles = []
        for i in range(3):
            p, q = P[i], P[(i + 1) % 3]
            d = q - p
            A = d @ d
            B = 2 * p @ d
            C = p @ p - rho2
            disc = B * B - 4 * A * C
            if disc < 0:
                continue
            sq = np.sqrt(disc)
            for s in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
                if -1e-9 <= s <= 1.0 + 1e-9:
                    x = p + np.clip(s, 0.0, 1.0) * d
                    angles.append(np.arctan2(x[1], x[0]))
        area2 = _cross2(P[1] - P[0], P[2] - P[0])

        def inside(t):
            x = rho * np.array([np.cos(t), np.sin(t)])
            for i in range(3):
                p, q = P[i], P[(i + 1) % 3]
                if _cross2(q - p, x - p) * area2 < 0:
                    return False
            return True

        arcs = []
        if not angles:
            if inside(0.0):
                arcs.append((0.0, 2 * np.pi))
        else:
            angles = np.sort(np.mod(angles, 2 * np.pi))
            ext = np.append(angles, angles[0] + 2 * np.pi)
            for t0, t1 in zip(ext[:-1], ext[1:]):
                if t1 - t0 > 1e-14 and inside(0.5 * (t0 + t1)):
                    arcs.append((t0, t1))
        out.append((o, u, v, rho, arcs))
    return out


# -- predicates ---------------------------------------------------------------

def _orient2(p, q, r):
    return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (
        r[..., 0] - p[..., 0]
    )


def segments_intersect_2d(p0, p1, q0, q1, eps=1e-12):
    """Closed segment intersection test for paired arrays of 2-D segments.

    Returns ``(hit, point)``; ``point`` is an intersection point when ``hit``
    (for collinear overlaps, an endpoint inside the other segment).
    """
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, q0, q1))
    scale = np.maximum.reduce([np.abs(x).max(axis=1) for x in (p0, p1, q0, q1)]) + 1.0
    tol = eps * scale * scale
    d1 = _orient2(q0, q1, p0)
    d2 = _orient2(q0, q1, p1)
    d3 = _orient2(p0, p1, q0)
    d4 = _orient2(p0, p1, q1)
    proper = ((d1 > tol) & (d2 < -tol) | (d1 < -tol) & (d2 > tol)) & (
        (d3 > tol) & (d4 < -tol) | (d3 < -tol) & (d4 > tol)
    )
    denom = d1 - d2
    s = np.where(np.abs(denom) > 0, d1 / np.where(denom == 0, 1.0, denom), 0.0)
    point = p0 + s[:, None] * (p1 - p0)

    def on_seg(a, b, c, d):
        # c collinear with a-b (|d| <= tol) and inside its bounding box
        lo = np.minimum(a, b) - tol[:, None]
        hi = np.maximum(a, b) + tol[:, None]
        return (np.abs(d) <= tol) & np.all((c >= lo) & (c <= hi), axis=1)

    hit = proper.copy()
    for a, b, c, d in ((q0, q1, p0, d1), (q0, q1, p1, d2), (p0, p1, q0, d3), (p0, p1, q1, d4)):
        touch = on_seg(a, b, c, d) & ~hit
        point[touch] = c[touch]
        hit |= touch
    return hit, point


def _tri_normal(a, b, c):
    return np.cross(b - a, c - a)


def segment_triangle_intersect(p0, p1, a, b, c, eps=1e-12):
    """Closed segment / triangle intersection in R^3, paired arrays."""
    p0, p1, a, b, c = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, a, b, c))
    nrm = _tri_normal(a, b, c)
    nn = np.linalg.norm(nrm, axis=1)
    nhat = nrm / nn[:, None]
    scale = np.maximum.reduce([np.abs(x).max(axis=1) for x in (p0, p1, a, b, c)]) + 1.0
    tol = eps * scale
    d0 = np.einsum("ij,ij->i", p0 - a, nhat)
    d1 = np.einsum("ij,ij->i", p1 - a, nhat)
    coplanar = (np.abs(d0) <= tol) & (np.abs(d1) <= tol)
    crosses = ~coplanar & ~((d0 > tol) & (d1 > tol)) & ~((d0 < -tol) & (d1 < -tol))
    denom = d0 - d1
    s = np.where(np.abs(denom) > 0, d0 / np.where(denom == 0, 1.0, denom), 0.0)
    s = np.clip(s, 0.0, 1.0)
    x = p0 + s[:, None] * (p1 - p0)

    def inside(x):
        ok = np.ones(len(x), dtype=bool)
        for u, v in ((a, b), (b, c), (c, a)):
            side = np.einsum("ij,ij->i", np.cross(v - u, x - u), nhat)
            ok &= side >= -tol * np.linalg.norm(v - u, axis=1)
        return ok

    hit = crosses & inside(x)
    point = x.copy()

    if np.any(coplanar):
        idx = np.where(coplanar)[0]
        # 2-D coordinates in the triangle's plane
        u = (b - a)[idx]
        u /= np.linalg.norm(u, axis=1)[:, None]
        v = np.cross(nhat[idx], u)

        def to2(P):
            Q = P[idx] - a[idx]
            return np.stack([np.einsum("ij,ij->i", Q, u), np.einsum("ij,ij->i", Q, v)], axis=1)

        P0, P1, A2, B2, C2 = to2(p0), to2(p1), to2(a), to2(b), to2(c)
        chit = np.zeros(len(idx), dtype=bool)
        cpt = np.zeros((len(idx), 3))
        for P in (p0, p1):
            ins = inside(P)[idx] & ~chit
            cpt[ins] = P[idx][ins]
            chit |= ins
        for U, W in ((A2, B2), (B2, C2), (C2, A2)):
            h, pt2 = segments_intersect_2d(P0, P1, U, W, eps)
            new = h & ~chit
            cpt[new] = (a[idx] + pt2[:, :1] * u + pt2[:, 1:] * v)[new]
            chit |= new
        hit[idx] = chit
        point[idx] = cpt
    return hit, point


def triangles_intersect(T1, T2, eps=1e-12):
    """Closed triangle/triangle intersection for paired arrays of shape (m, 3, 3)."""
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    m = len(T1)
    hit = np.zeros(m, dtype=bool)
    point = np.zeros((m, 3))
    for S, T in ((T1, T2), (T2, T1)):
        for i, j in ((0, 1), (1, 2), (2, 0)):
            h, p = segment_triangle_intersect(S[:, i], S[:, j], T[:, 0], T[:, 1], T[:, 2], eps)
            new = h & ~hit
            point[new] = p[new]
            hit |= new
    return hit, point


def point_segment_distance(x, a, b):
    """Distance from each point x (m, N) to each segment (s, N) -> (m, s), plus params."""
    x = np.atleast_2d(x)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0, dd, 1.0)
    t = np.einsum("msk,sk->ms", x[:, None, :] - a[None], d) / dd[None]
    t = np.clip(t, 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    return np.linalg.norm(x[:, None, :] - proj, axis=2), t


def closest_points_segments(p0, p1, q0, q1):
    """Closest points between segment pairs (paired arrays), returns (P, Q, dist)."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    s = np.where(denom > 1e-300, np.clip((b * f - c * e) / np.where(denom > 1e-300, denom, 1.0), 0, 1), 0.0)
    t = (b * s + f) / np.where(e > 0, e, 1.0)
    t_cl = np.clip(t, 0.0, 1.0)
    s = np.where(t != t_cl, np.clip((b * t_cl - c) / np.where(a > 0, a, 1.0), 0, 1), s)
    t = t_cl
    P = p0 + s[:, None] * d1
    Q = q0 + t[:, None] * d2
    return P, Q, np.linalg.norm(P - Q, axis=1)
