"""Gaussian area, the drift Laplacian, the stability operator and its lowest eigenvalue.

On meshes everything is built from two assembled objects: the weighted
stiffness ``K_ij = int e^{-|x|^2/4} grad phi_i . grad phi_j`` and the lumped
weighted mass ``M_i``.  The discrete drift Laplacian is ``-M^{-1} K``, which
is self-adjoint for ``<u, v>_w = u^T M v`` by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import pi

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .catalog import (
    CatalogPiece,
    GeneralizedCylinder,
    catalog_differential_data,
    coordinate_fields,
    stability_operator_on_normal_part,
)
from .errors import (
    MissingCurvatureError,
    PreconditionError,
    SingularMassError,
    ZeroFieldError,
)
from .mesh import DiscreteHypersurface, lumped_weights, surface_data

__all__ = [
    "gaussian_weight",
    "gaussian_area",
    "WeightedForms",
    "weighted_forms",
    "NormalField",
    "apply_weighted_drift_laplacian",
    "apply_stability_operator",
    "rayleigh_quotient",
    "SpectralReport",
    "lowest_dirichlet_eigenvalue",
    "check_coordinate_fields",
]


def gaussian_weight(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-np.sum(x * x, axis=-1) / 4.0)


def gaussian_area(surface, order=1, curved=None):
    """F = (4 pi)^{-n/2} int e^{-|x|^2/4} over a mesh or an analytic catalog piece."""
    n = surface.n
    if isinstance(surface, CatalogPiece):
        integral = surface.radial_integral(lambda rad, t: np.exp(-rad * rad / 4.0))
    else:
        if len(surface.simplices) == 0:
            return 0.0
        X, W = surface.quadrature(order=order, curved=curved)
        integral = float(np.sum(W * gaussian_weight(X)))
    return (4.0 * pi) ** (-n / 2.0) * integral


@dataclass(eq=False)
class WeightedForms:
    """Assembled weighted stiffness ``K`` (sparse) and lumped mass ``M`` (vector)."""

    surface: DiscreteHypersurface
    K: sparse.csr_matrix
    M: np.ndarray

    @cached_property
    def interior(self):
        used = np.zeros(self.surface.num_vertices, dtype=bool)
        used[np.unique(self.surface.simplices)] = True
        return used & ~self.surface.boundary_vertices

    def inner(self, u, v):
        return float(np.sum(self.M * u * v))

    def dirichlet(self, u, v):
        return float(u @ (self.K @ v))


def weighted_forms(surface: DiscreteHypersurface) -> WeightedForms:
    S = surface.simplices
    V = surface.num_vertices
    G = surface.grads  # (s, n+1, N)
    bary = surface.vertices[S].mean(axis=1)
    wvol = surface.volumes * gaussian_weight(bary)
    local = np.einsum("s,sak,sbk->sab", wvol, G, G)
    rows = np.repeat(S, S.shape[1], axis=1).ravel()
    cols = np.tile(S, (1, S.shape[1])).ravel()
    K = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(V, V)).tocsr()
    M = lumped_weights(surface) * gaussian_weight(surface.vertices)
    return WeightedForms(surface, K, M)


@dataclass
class NormalField:
    """Normal vector field sampled at the vertices (or sample points) of a surface."""

    values: np.ndarray


def _forms(surface, forms):
    if forms is None:
        forms = weighted_forms(surface)
    return forms


def apply_weighted_drift_laplacian(surface, w, forms=None):
    """Discrete ``Lcal w = -M^{-1} K w``.

    Raises
    ------
    SingularMassError
        If a lumped mass entry is not positive.
    """
    forms = _forms(surface, forms)
    if np.any(forms.M <= 0):
        raise SingularMassError(f"{int(np.sum(forms.M <= 0))} vertices have nonpositive lumped mass")
    return -(forms.K @ np.asarray(w, dtype=float)) / forms.M


def stability_potential(surface, norm_A_sq=None, estimated=False):
    """Vertex values of ``|A|^2 + 1/2``; analytic on catalog meshes, estimated otherwise."""
    if norm_A_sq is None:
        if surface.analytic_source is None and not estimated:
            raise MissingCurvatureError("no analytic source; pass norm_A_sq or estimated=True")
        norm_A_sq = surface_data(surface, estimated=estimated).norm_A_sq
    return np.asarray(norm_A_sq, dtype=float) + 0.5


def apply_stability_operator(surface, v, forms=None, norm_A_sq=None, estimated=False, points=None):
    """``L v``; scalar ``w`` means the hypersurface field ``w n``.

    When ``surface`` is a :class:`GeneralizedCylinder`, ``v`` is a constant
    vector ``b`` standing for the field ``b^perp`` at ``points``; this
    analytic path covers the coordinate fields in any codimension.
    """
    if isinstance(surface, GeneralizedCylinder):
        b = np.asarray(v, dtype=float)
        if points is None or b.shape != (surface.N,):
            raise ValueError("analytic path takes sample points and the constant vector b of v = b^perp")
        data = catalog_differential_data(surface, points)
        return NormalField(stability_operator_on_normal_part(surface, data, b)[1])
    forms = _forms(surface, forms)
    P = stability_potential(surface, norm_A_sq, estimated)
    if isinstance(v, NormalField):
        nrm = surface_data(surface, estimated=estimated).unit_normal
        w = np.einsum("pk,pk->p", v.values, nrm)
        Lw = apply_weighted_drift_laplacian(surface, w, forms) + P * w
        return NormalField(Lw[:, None] * nrm)
    w = np.asarray(v, dtype=float)
    return apply_weighted_drift_laplacian(surface, w, forms) + P * w


def rayleigh_quotient(surface, w, forms=None, norm_A_sq=None, estimated=False):
    """``Q(w) = (<grad w, grad w>_w - <(|A|^2 + 1/2) w, w>_w) / <w, w>_w``.

    ``Q(w) < 0`` for some Dirichlet ``w`` certifies Gaussian instability.
    """
    w = np.asarray(w, dtype=float)
    forms = _forms(surface, forms)
    if np.any(w[surface.boundary_vertices] != 0):
        raise PreconditionError("test field must vanish on boundary vertices")
    mass = forms.inner(w, w)
    if mass == 0:
        raise ZeroFieldError("test field is identically zero")
    P = stability_potential(surface, norm_A_sq, estimated)
    return (forms.dirichlet(w, w) - float(np.sum(forms.M * P * w * w))) / mass


@dataclass
class SpectralReport:
    eigenvalue: float
    residual: float
    iterations: int
    converged: bool
    vector: np.ndarray
    shift: float


def _shifted_factor(A, Mi, sigma):
    """Factor ``A - sigma B`` without pivoting; second value tells if it is positive definite."""
    S = sparse.csc_matrix(A - sigma * sparse.diags(Mi))
    lu = splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    nopivot = np.array_equal(lu.perm_r, lu.perm_c)
    return lu, bool(nopivot and np.all(lu.U.diagonal() > 0))


def lowest_dirichlet_eigenvalue(surface, forms=None, norm_A_sq=None, estimated=False,
                                tol=1e-8, max_iter=500, block=4, seed=0) -> SpectralReport:
    """Smallest eigenvalue of ``-L`` with Dirichlet conditions on the boundary.

    Block inverse iteration on the pencil ``(K - M P, M)`` with Rayleigh-Ritz
    on the block.  The first shift lies below the Gershgorin bound; later
    shifts move up towards the leading Ritz value but are only accepted when
    the factorization of the shifted pencil has positive pivots, so the
    shift always stays below the lowest eigenvalue.  The reported residual
    is ``||(A - lam B) x||_{B^-1}`` for ``x^T B x = 1``.
    """
    forms = _forms(surface, forms)
    P = stability_potential(surface, norm_A_sq, estimated)
    dof = np.where(forms.interior)[0]
    if len(dof) == 0:
        raise PreconditionError("no interior vertices")
    Mi = forms.M[dof]
    if np.any(Mi <= 0):
        raise SingularMassError("nonpositive lumped mass at an interior vertex")
    A = forms.K[dof][:, dof] - sparse.diags(Mi * P[dof])
    A = sparse.csc_matrix((A + A.T) * 0.5)

    s = 1.0 / np.sqrt(Mi)
    C = sparse.diags(s) @ A @ sparse.diags(s)
    diag = C.diagonal()
    off = np.asarray(abs(C).sum(axis=1)).ravel() - np.abs(diag)
    lower = float(np.min(diag - off))
    shift = lower - 1e-3 * max(1.0, abs(lower))
    lu, _ = _shifted_factor(A, Mi, shift)

    rng = np.random.default_rng(seed)
    p = min(block, len(dof))
    X = rng.standard_normal((len(dof), p))
    X[:, 0] = 1.0
    lam, prev, res, it = np.inf, np.inf, np.inf, 0
    x = X[:, 0]
    for it in range(1, max_iter + 1):
        X = lu.solve(Mi[:, None] * X)
        G = X.T @ (Mi[:, None] * X)
        L = np.linalg.cholesky(G)
        X = np.linalg.solve(L, X.T).T
        T = X.T @ (A @ X)
        vals, vecs = np.linalg.eigh(0.5 * (T + T.T))
        X = X @ vecs
        lam = float(vals[0])
        x = X[:, 0]
        r = A @ x - lam * Mi * x
        res = float(np.sqrt(np.sum(r * r / Mi)))
        if res <= tol:
            break
        if abs(prev - lam) < 1e-2 * max(1.0, abs(lam)) and lam - shift > 10 * res:
            gap = float(vals[1] - vals[0]) if p > 1 else abs(lam)
            delta = max(res, 1e-3 * gap, 1e-10)
            while lam - delta > shift:
                cand, ok = _shifted_factor(A, Mi, lam - delta)
                if ok:
                    lu, shift = cand, lam - delta
                    break
                delta *= 4.0
        prev = lam
    full = np.zeros(surface.num_vertices)
    full[dof] = x
    return SpectralReport(lam, res, it, res <= tol, full, shift)


def check_coordinate_fields(cyl: GeneralizedCylinder, points, tol=1e-10):
    """Verify ``sum_i |v_i|^2 = N - n`` and ``L v_i = v_i / 2`` for ``v_i = e_i^perp``."""
    data = catalog_differential_data(cyl, points)
    v = coordinate_fields(data)
    sum_err = float(np.max(np.abs(np.einsum("pik,pik->p", v, v) - (cyl.N - cyl.n))))
    L_err = 0.0
    for i, e in enumerate(np.eye(cyl.N)):
        vi, Lvi = stability_operator_on_normal_part(cyl, data, e)
        L_err = max(L_err, float(np.max(np.abs(Lvi - 0.5 * vi))))
        L_err = max(L_err, float(np.max(np.abs(vi - v[:, i]))))
    return {
        "operation": "check_coordinate_fields",
        "inputs": {"n": cyl.n, "k": cyl.k, "N": cyl.N, "points": len(data.points)},
        "value": {"sum_norm_sq_error": sum_err, "L_eigen_error": L_err},
        "residual": max(sum_err, L_err),
        "tolerance": tol,
        "pass": bool(max(sum_err, L_err) <= tol),
    }
