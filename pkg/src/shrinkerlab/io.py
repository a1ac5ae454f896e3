"""Plain-text mesh files.

Format (ASCII, whitespace separated)::

    SHRNK n N V S B
    V lines of N floats          vertices
    S lines of n+1 integers      simplices (0-based)
    B integers                   boundary facet ids, one per line

A facet id ``s*(n+1) + j`` names the facet of simplex ``s`` opposite its
local vertex ``j``.  Floats are written with 17 significant digits so a
write/parse round trip is exact.
"""

from __future__ import annotations

import numpy as np

from .errors import MeshFormatError
from .mesh import DiscreteHypersurface

__all__ = ["write_mesh", "format_mesh", "parse_mesh", "parse_mesh_text"]


def format_mesh(mesh: DiscreteHypersurface) -> str:
    n, N = mesh.n, mesh.N
    lines = [f"SHRNK {n} {N} {mesh.num_vertices} {len(mesh.simplices)} {len(mesh.boundary_facets)}"]
    lines += [" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in s) for s in mesh.simplices]
    lines += [str(int(b)) for b in mesh.boundary_facets]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: DiscreteHypersurface, path):
    with open(path, "w") as fh:
        fh.write(format_mesh(mesh))


def parse_mesh(path) -> DiscreteHypersurface:
    with open(path) as fh:
        return parse_mesh_text(fh.read())


def _ints(tokens, lineno, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MeshFormatError(f"{what} must be integers", lineno) from None


def parse_mesh_text(text: str) -> DiscreteHypersurface:
    """Parse SHRNK text, naming the first offending line on error.

    Raises
    ------
    MeshFormatError
        For a malformed header, wrong field counts, indices out of range,
        repeated or degenerate simplices, or unknown boundary facets.
    """
    lines = text.splitlines()
    if not lines:
        raise MeshFormatError("empty file, expected header 'SHRNK n N V S B'", 1)
    head = lines[0].split()
    if len(head) != 6 or head[0] != "SHRNK":
        raise MeshFormatError("malformed header, expected 'SHRNK n N V S B'", 1)
    n, N, V, S, B = _ints(head[1:], 1, "header counts")
    if n < 1 or N < n + 1 or min(V, S, B) < 0:
        raise MeshFormatError(f"malformed header counts n={n} N={N} V={V} S={S} B={B}", 1)
    need = 1 + V + S + B
    body = lines[1:need]
    if len(lines) < need:
        raise MeshFormatError(f"file ends early: expected {need} lines, found {len(lines)}", len(lines) + 1)
    for extra, line in enumerate(lines[need:], start=need + 1):
        if line.strip():
            raise MeshFormatError("unexpected content after the boundary list", extra)

    verts = np.zeros((V, N))
    for i in range(V):
        lineno = 2 + i
        tok = body[i].split()
        if len(tok) != N:
            raise MeshFormatError(f"vertex needs {N} coordinates, found {len(tok)}", lineno)
        try:
            verts[i] = [float(t) for t in tok]
        except ValueError:
            raise MeshFormatError("vertex coordinates must be floats", lineno) from None
        if not np.all(np.isfinite(verts[i])):
            raise MeshFormatError("vertex coordinates must be finite", lineno)

    simp = np.zeros((S, n + 1), dtype=int)
    for i in range(S):
        lineno = 2 + V + i
        tok = body[V + i].split()
        if len(tok) != n + 1:
            raise MeshFormatError(f"simplex needs {n + 1} indices, found {len(tok)}", lineno)
        idx = _ints(tok, lineno, "simplex indices")
        bad = [j for j in idx if not 0 <= j < V]
        if bad:
            raise MeshFormatError(f"vertex index {bad[0]} out of range [0, {V})", lineno)
        if len(set(idx)) != n + 1:
            raise MeshFormatError("degenerate simplex: repeated vertex", lineno)
        simp[i] = idx

    if S:
        probe = DiscreteHypersurface(n, verts, simp)
        E = verts[simp]
        diam = max(float(np.ptp(E.reshape(-1, N), axis=0).max()), 1e-300)
        flat = np.where(probe.volumes <= 1e-14 * diam ** n)[0]
        if len(flat):
            raise MeshFormatError("degenerate simplex: zero volume", 2 + V + int(flat[0]))

    bnd = np.zeros(B, dtype=int)
    for i in range(B):
        lineno = 2 + V + S + i
        tok = body[V + S + i].split()
        if len(tok) != 1:
            raise MeshFormatError("boundary line needs one facet id", lineno)
        (fid,) = _ints(tok, lineno, "boundary facet id")
        if not 0 <= fid < S * (n + 1):
            raise MeshFormatError(f"boundary facet id {fid} out of range [0, {S * (n + 1)})", lineno)
        bnd[i] = fid
    return DiscreteHypersurface(n, verts, simp, bnd)
