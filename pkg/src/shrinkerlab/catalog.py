"""Generalized cylinders S^k_{sqrt(2k)} x R^{n-k} and their exact differential data.

A cylinder is stored in a *standard splitting* of R^N: coordinates ``0..k``
carry the round sphere factor, ``k+1..n`` the Euclidean factor and
``n+1..N-1`` (only present for higher codimension) are identically zero.
``rotation`` maps the standard splitting to the ambient position and
``center`` translates it.  Only the untranslated cylinder with radius
``sqrt(2k)`` is a shrinker; the other parameters exist so that tests can
build non-shrinker doubles (offset lines, circles of the wrong radius).

Mean curvature is the trace of the vector valued second fundamental form
``A(X, Y) = (D_X Y)^perp``.  With that convention the round sphere has
inward pointing mean curvature, and the global sign ``SHRINKER_SIGN`` is
calibrated once so that the shrinker sphere has zero residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi, sqrt

import numpy as np
from scipy.stats import special_ortho_group

from .errors import PointOffSurfaceError, RadiusTooSmallError

__all__ = [
    "GeneralizedCylinder",
    "DifferentialData",
    "CatalogPiece",
    "catalog_differential_data",
    "shrinker_residual_pointwise",
    "calibrate_shrinker_sign",
    "SHRINKER_SIGN",
    "sphere_area",
    "random_rotation",
    "coordinate_fields",
    "stability_operator_on_normal_part",
    "drift_laplacian_linear",
    "drift_laplacian_sq_norm",
    "laplacian_sq_norm",
    "geodesic",
]


def sphere_area(j):
    """Area of the unit j-sphere in R^{j+1}."""
    return 2.0 * pi ** ((j + 1) / 2.0) / gamma((j + 1) / 2.0)


def random_rotation(N, rng=None):
    rng = np.random.default_rng(rng)
    if N == 1:
        return np.eye(1)
    return special_ortho_group.rvs(N, random_state=rng)


@dataclass(frozen=True, eq=False)
class GeneralizedCylinder:
    """The cylinder S^k_r x R^{n-k} in R^N, rotated and (optionally) translated.

    Parameters
    ----------
    n : int
        Intrinsic dimension.
    k : int
        Dimension of the sphere factor, ``0 <= k <= n``.
    rotation : (N, N) array, optional
        Orthogonal matrix; its size fixes the ambient dimension ``N``.
    ambient : int, optional
        Ambient dimension when no rotation is given (default ``n + 1``).
    radius : float, optional
        Sphere-factor radius.  Defaults to ``sqrt(2k)``; anything else gives
        a non-shrinker test double.
    center : (N,) array, optional
        Translation, default the origin.
    """

    n: int
    k: int
    rotation: np.ndarray | None = None
    ambient: int | None = None
    radius: float | None = None
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.k <= self.n:
            raise ValueError(f"need n >= 1 and 0 <= k <= n, got n={self.n}, k={self.k}")
        if self.rotation is not None:
            Q = np.array(self.rotation, dtype=float)
            N = Q.shape[0]
            if Q.shape != (N, N):
                raise ValueError("rotation must be square")
            if np.max(np.abs(Q.T @ Q - np.eye(N))) > 1e-12:
                raise ValueError("rotation columns are not orthonormal to 1e-12")
        else:
            N = self.ambient if self.ambient is not None else self.n + 1
            Q = np.eye(N)
        if N < self.n + 1:
            raise ValueError("ambient dimension must be at least n + 1")
        radius = sqrt(2.0 * self.k) if self.radius is None else float(self.radius)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        c = np.zeros(N) if self.center is None else np.array(self.center, dtype=float)
        if c.shape != (N,):
            raise ValueError("center has the wrong dimension")
        Q.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "rotation", Q)
        object.__setattr__(self, "ambient", N)
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "center", c)

    @property
    def N(self):
        return self.ambient

    @property
    def r(self):
        return self.radius

    @property
    def codim(self):
        return self.N - self.n

    @property
    def is_shrinker(self):
        return abs(self.r - sqrt(2.0 * self.k)) < 1e-14 and not np.any(self.center)

    @property
    def is_closed(self):
        return self.k == self.n

    @property
    def label(self):
        if self.k == 0:
            return "plane"
        if self.k == self.n:
            return "sphere"
        return "cylinder"

    def rotated(self, Q):
        """Same cylinder with the extra rotation ``Q`` applied in front."""
        Q = np.asarray(Q, dtype=float)
        return GeneralizedCylinder(self.n, self.k, rotation=Q @ self.rotation,
                                   radius=self.r, center=Q @ self.center)

    def padded(self, extra=1):
        """The same cylinder seen in R^{N+extra} (higher codimension)."""
        N = self.N + extra
        Q = np.eye(N)
        Q[: self.N, : self.N] = self.rotation
        c = np.zeros(N)
        c[: self.N] = self.center
        return GeneralizedCylinder(self.n, self.k, rotation=Q, radius=self.r, center=c)

    # -- standard coordinates -------------------------------------------
    def to_standard(self, p):
        return (np.asarray(p, dtype=float) - self.center) @ self.rotation

    def from_standard(self, y):
        return np.asarray(y, dtype=float) @ self.rotation.T + self.center

    def distance(self, p):
        y = np.atleast_2d(self.to_standard(p))
        rho = np.linalg.norm(y[:, : self.k + 1], axis=1)
        extra = np.linalg.norm(y[:, self.n + 1:], axis=1)
        return np.hypot(rho - self.r, extra)

    def project(self, p):
        """Closest point on the cylinder (radial projection in the sphere factor)."""
        p = np.asarray(p, dtype=float)
        y = np.atleast_2d(self.to_standard(p)).copy()
        ys = y[:, : self.k + 1]
        rho = np.linalg.norm(ys, axis=1)
        if self.r == 0.0:
            ys[:] = 0.0
        else:
            safe = np.where(rho > 0, rho, 1.0)
            ys *= (self.r / safe)[:, None]
            ys[rho == 0, 0] = self.r
        y[:, self.n + 1:] = 0.0
        out = self.from_standard(y)
        return out.reshape(p.shape)

    def projection_jacobian(self, p):
        """Derivative of :meth:`project` at each row of ``p``, shape (m, N, N)."""
        y = np.atleast_2d(self.to_standard(p))
        m = y.shape[0]
        J = np.zeros((m, self.N, self.N))
        ks = self.k + 1
        if self.r > 0:
            ys = y[:, :ks]
            rho = np.linalg.norm(ys, axis=1)
            u = ys / rho[:, None]
            J[:, :ks, :ks] = (self.r / rho)[:, None, None] * (
                np.eye(ks)[None] - u[:, :, None] * u[:, None, :]
            )
        idx = np.arange(ks, self.n + 1)
        J[:, idx, idx] = 1.0
        Q = self.rotation
        return Q[None] @ J @ Q.T[None]

    def sample(self, m, rng=None, spread=3.0):
        """``m`` random points on the cylinder; Euclidean factor ~ N(0, spread^2)."""
        rng = np.random.default_rng(rng)
        y = np.zeros((m, self.N))
        if self.r > 0:
            g = rng.standard_normal((m, self.k + 1))
            y[:, : self.k + 1] = self.r * g / np.linalg.norm(g, axis=1)[:, None]
        y[:, self.k + 1: self.n + 1] = spread * rng.standard_normal((m, self.n - self.k))
        return self.from_standard(y)


@dataclass
class DifferentialData:
    """Pointwise differential data, batched along the first axis.

    ``second_fundamental[p, i, j]`` is the normal vector ``A(f_i, f_j)`` in R^N;
    ``unit_normal`` is only set in codimension one.
    """

    points: np.ndarray
    tangent_frame: np.ndarray
    normal_frame: np.ndarray
    x_tangent: np.ndarray
    x_normal: np.ndarray
    mean_curvature_vector: np.ndarray
    second_fundamental: np.ndarray
    unit_normal: np.ndarray | None = None

    @property
    def n(self):
        return self.tangent_frame.shape[1]

    @property
    def norm_A_sq(self):
        return np.einsum("pijk,pijk->p", self.second_fundamental, self.second_fundamental)

    @property
    def second_fundamental_scalar(self):
        """A contracted with the unit normal (codimension one only)."""
        if self.unit_normal is None:
            raise ValueError("scalar second fundamental form needs codimension one")
        return np.einsum("pijk,pk->pij", self.second_fundamental, self.unit_normal)

    @property
    def mean_curvature_norm(self):
        return np.linalg.norm(self.mean_curvature_vector, axis=1)


def _householder_frames(u):
    """Rows of orthonormal bases: column 0 of each matrix is ``u``."""
    m, d = u.shape
    e0 = np.zeros(d)
    e0[0] = 1.0
    flip = u[:, 0] > 0
    v = u - e0
    v[flip] = u[flip] + e0
    vv = np.einsum("pi,pi->p", v, v)
    H = np.eye(d)[None] - 2.0 * v[:, :, None] * v[:, None, :] / vv[:, None, None]
    # H e0 = u when u[0] <= 0, and -u otherwise; fix the sign of column 0
    H[flip] *= -1.0
    return H


def catalog_differential_data(cyl: GeneralizedCylinder, p, tol=1e-9) -> DifferentialData:
    """Closed-form frame, normal, A and mean curvature at points of ``cyl``.

    Raises
    ------
    PointOffSurfaceError
        If any point is farther than ``tol`` from the cylinder.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    dist = cyl.distance(p)
    if np.any(dist > tol):
        raise PointOffSurfaceError(
            f"point at distance {dist.max():.3e} from the {cyl.label} (tol {tol:g})"
        )
    n, k, N, r = cyl.n, cyl.k, cyl.N, cyl.r
    m = p.shape[0]
    y = cyl.to_standard(p)
    ks = k + 1

    if r > 0:
        ys = y[:, :ks]
        u_s = ys / np.linalg.norm(ys, axis=1)[:, None]
    else:
        u_s = np.zeros((m, ks))
        u_s[:, 0] = 1.0
    Hh = _householder_frames(u_s) if ks > 1 else np.ones((m, 1, 1))

    tangent = np.zeros((m, n, N))
    tangent[:, :k, :ks] = np.transpose(Hh[:, :, 1:], (0, 2, 1))
    for j in range(k, n):
        tangent[:, j, j + 1] = 1.0
    normal = np.zeros((m, N - n, N))
    normal[:, 0, :ks] = u_s
    for a in range(1, N - n):
        normal[:, a, n + a] = 1.0

    Q = cyl.rotation
    tangent = tangent @ Q.T
    normal = normal @ Q.T
    u = normal[:, 0]

    A = np.zeros((m, n, n, N))
    if k > 0:
        idx = np.arange(k)
        A[:, idx, idx, :] = -(1.0 / r) * u[:, None, :]
    H = np.einsum("piik->pk", A)

    xt = np.einsum("pj,pjk->pk", np.einsum("pk,pjk->pj", p, tangent), tangent)
    xn = p - xt
    return DifferentialData(
        points=p,
        tangent_frame=tangent,
        normal_frame=normal,
        x_tangent=xt,
        x_normal=xn,
        mean_curvature_vector=H,
        second_fundamental=A,
        unit_normal=u.copy() if N == n + 1 else None,
    )


def shrinker_residual_pointwise(data: DifferentialData, sign=None):
    """``|H - s x_perp / 2|`` at every point of ``data``."""
    s = SHRINKER_SIGN if sign is None else sign
    return np.linalg.norm(data.mean_curvature_vector - 0.5 * s * data.x_normal, axis=1)


def calibrate_shrinker_sign(n=2, tol=1e-12):
    """Return the sign s with zero residual on S^n_{sqrt(2n)}."""
    sphere = GeneralizedCylinder(n, n)
    data = catalog_differential_data(sphere, sphere.sample(16, rng=0))
    for s in (1, -1):
        if shrinker_residual_pointwise(data, sign=s).max() <= tol:
            return s
    raise RuntimeError("no sign makes the shrinker sphere a solution")


SHRINKER_SIGN = calibrate_shrinker_sign()


def laplacian_sq_norm(data: DifferentialData):
    """Delta_Sigma |x|^2 = 2n + 2 <x, H> (valid on any submanifold)."""
    return 2.0 * data.n + 2.0 * np.einsum("pk,pk->p", data.points, data.mean_curvature_vector)


def drift_laplacian_linear(data: DifferentialData, a):
    """Drift Laplacian of the restriction of ``x -> <a, x>``; ``a`` is (N,) or (m, N)."""
    a = np.broadcast_to(np.asarray(a, dtype=float), data.points.shape)
    return np.einsum("pk,pk->p", a, data.mean_curvature_vector) - 0.5 * np.einsum(
        "pk,pk->p", data.x_tangent, a
    )


def drift_laplacian_sq_norm(data: DifferentialData):
    xt2 = np.einsum("pk,pk->p", data.x_tangent, data.x_tangent)
    return laplacian_sq_norm(data) - xt2


def coordinate_fields(data: DifferentialData):
    """``v_i = e_i^perp`` for every ambient basis vector, shape (m, N, N).

    ``v[p, i]`` is the normal projection of ``e_i`` at point ``p``.
    """
    nf = data.normal_frame
    return np.einsum("pai,pak->pik", nf, nf)


def stability_operator_on_normal_part(cyl: GeneralizedCylinder, data: DifferentialData, b):
    """Return ``(v, L v)`` for the normal field ``v = b^perp`` of a constant vector ``b``.

    The normal frame of a round cylinder (radial direction of the sphere
    factor plus the flat extra directions) is parallel for the normal
    connection, so ``L v = sum_a (Lcal f_a) nu_a + <A_ij, v> A_ij + v/2``
    with ``f_a = <b, nu_a>``.  Each ``f_a`` restricts a linear function
    (``<P_s b, x - c>/r`` for the radial direction, a constant otherwise),
    whose drift Laplacian is closed form.
    """
    b = np.asarray(b, dtype=float)
    nf = data.normal_frame
    f = np.einsum("pak,k->pa", nf, b)
    v = np.einsum("pa,pak->pk", f, nf)

    lf = np.zeros_like(f)
    if cyl.k > 0 and cyl.r > 0:
        Q = cyl.rotation
        ks = cyl.k + 1
        Ps = Q[:, :ks] @ Q[:, :ks].T
        lf[:, 0] = drift_laplacian_linear(data, Ps @ b / cyl.r)
    Lcal_v = np.einsum("pa,pak->pk", lf, nf)

    A = data.second_fundamental
    coeff = np.einsum("pijk,pk->pij", A, v)
    curv = np.einsum("pij,pijk->pk", coeff, A)
    return v, Lcal_v + curv + 0.5 * v


def geodesic(cyl: GeneralizedCylinder, p, T, t):
    """Point at arclength ``t`` along the geodesic from ``p`` with unit tangent ``T``."""
    y = cyl.to_standard(p)
    d = np.asarray(T, dtype=float) @ cyl.rotation
    ks = cyl.k + 1
    out = y + t * d
    if cyl.k > 0 and cyl.r > 0:
        ds = d[:ks]
        speed = np.linalg.norm(ds)
        if speed > 0:
            ang = speed * t / cyl.r
            out[:ks] = y[:ks] * np.cos(ang) + cyl.r * (ds / speed) * np.sin(ang)
    return cyl.from_standard(out)


@dataclass
class CatalogPiece:
    """``B_R`` intersected with a centred catalog cylinder, integrated analytically.

    Integrands that depend only on ``|x|`` (and on ``t``, the norm of the
    Euclidean component) reduce to one-dimensional Gauss-Legendre integrals
    against the exact measure ``|S^k| r^k |S^{m-1}| t^{m-1} dt`` with
    ``m = n - k``.
    """

    shape: GeneralizedCylinder
    R: float
    nodes: int = 200

    def __post_init__(self):
        if np.any(self.shape.center):
            raise ValueError("analytic pieces need a cylinder through the origin's centre")
        if self.R <= self.shape.r and not (self.shape.k == 0 and self.R > 0):
            raise RadiusTooSmallError(f"B_{self.R} misses the {self.shape.label}")

    @property
    def n(self):
        return self.shape.n

    @property
    def m(self):
        return self.shape.n - self.shape.k

    @property
    def sphere_measure(self):
        k, r = self.shape.k, self.shape.r
        if k == 0 and r == 0.0:
            return 1.0
        return sphere_area(k) * r ** k

    def _t_of(self, rad):
        return np.sqrt(np.maximum(np.asarray(rad, dtype=float) ** 2 - self.shape.r ** 2, 0.0))

    def radial_integral(self, f, rmax=None, breaks=()):
        """Integral of ``f(rad, t)`` over ``B_rmax`` intersected with the piece."""
        rmax = self.R if rmax is None else min(rmax, self.R)
        r = self.shape.r
        if rmax < r or (rmax == r and self.m > 0):
            return 0.0
        if self.m == 0:
            return float(self.sphere_measure * f(np.array([r]), np.array([0.0]))[0])
        tmax = float(self._t_of(rmax))
        cuts = sorted({0.0, tmax, *[float(self._t_of(b)) for b in breaks if r < b < rmax]})
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi <= lo:
                continue
            t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            rad = np.sqrt(r * r + t * t)
            dens = sphere_area(self.m - 1) * t ** (self.m - 1)
            total += 0.5 * (hi - lo) * np.sum(w * dens * f(rad, t))
        return float(self.sphere_measure * total)

    def slice_integral(self, f, rad):
        """Integral of ``f(rad, t)`` over ``dB_rad`` intersected with the piece."""
        r = self.shape.r
        if self.m == 0 or rad <= r:
            return 0.0
        t = float(self._t_of(rad))
        dens = sphere_area(self.m - 1) * t ** (self.m - 1)
        return float(self.sphere_measure * dens * f(np.array([rad]), np.array([t]))[0])

    def critical_radii(self):
        """Critical values of ``|x|`` on the cylinder."""
        return np.array([self.shape.r])
