"""Command-line driver: ``shrinkerlab <command> [flags]``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
configuration or precondition errors.  Failures print a JSON object with
``status``, ``kind``, ``message`` and the run configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from math import sqrt

import numpy as np

from .catalog import (
    CatalogPiece,
    GeneralizedCylinder,
    catalog_differential_data,
    random_rotation,
    shrinker_residual_pointwise,
    sphere_area,
)
from .certificates import certify_instability, estimate_Rn
from .errors import ShrinkerLabError
from .frankel import frankel_verdict
from .functional import gaussian_area
from .growth import (
    SingularSetProxy,
    build_cutoff,
    check_H2_bound,
    check_volume_growth,
    cutoff_energy,
    growth_profile,
)
from .io import parse_mesh, write_mesh
from .mesh import build_mesh, shrinker_residual

COMMANDS = ("catalog", "residual", "area", "growth", "cutoff", "certify", "rn-sweep", "frankel")
SHAPE_K = {"plane": lambda n: 0, "sphere": lambda n: n, "cylinder": lambda n: 1}


class ConfigError(ShrinkerLabError):
    pass


@dataclass
class RunConfig:
    command: str
    shape: str | None = None
    n: int = 2
    k: int | None = None
    R: float | None = None
    h: float = 0.1
    r1: float | None = None
    r2: float | None = None
    rmax: float | None = None
    step: float = 0.25
    tol: float | None = None
    seed: int = 0
    rotate: bool = False
    mesh: str | None = None
    rho: float | None = None
    points: int = 1
    cap: float = 20.0
    pair: str = "sweep"
    out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.h <= 0:
            raise ConfigError("h must be positive")
        if self.tol is not None and self.tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.step <= 0:
            raise ConfigError("step must be positive")
        if self.n < 1:
            raise ConfigError("n must be at least 1")

    def to_dict(self):
        return asdict(self)


def threads():
    """Worker cap from ``SHRINKERLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SHRINKERLAB_THREADS", "1")))
    except ValueError:
        return 1


def _shape(cfg: RunConfig) -> GeneralizedCylinder:
    if cfg.k is not None:
        k = cfg.k
    elif cfg.shape is not None:
        k = SHAPE_K[cfg.shape](cfg.n)
    else:
        raise ConfigError("give --shape or --k")
    if not 0 <= k <= cfg.n:
        raise ConfigError(f"k must lie in [0, n], got k={k}")
    Q = random_rotation(cfg.n + 1, cfg.seed) if cfg.rotate else None
    return GeneralizedCylinder(cfg.n, k, rotation=Q)


def _surface(cfg: RunConfig, analytic=False):
    """A mesh (file, or catalog mesh for n <= 2) or the analytic piece for n >= 3."""
    if cfg.mesh is not None:
        m = parse_mesh(cfg.mesh)
        m.R = cfg.R if cfg.R is not None else float(np.linalg.norm(m.vertices, axis=1).max(initial=0))
        m.h = cfg.h
        return m
    shape = _shape(cfg)
    R = cfg.R if cfg.R is not None else (cfg.rmax if cfg.rmax is not None else 5.0)
    if analytic or cfg.n >= 3:
        return CatalogPiece(shape, R)
    return build_mesh(shape, R, cfg.h)


def _report(operation, inputs, value, tol, passed, residual=None):
    return {"operation": operation, "inputs": inputs, "value": value, "residual": residual,
            "tolerance": tol, "pass": bool(passed)}


def _cmd_catalog(cfg):
    shape = _shape(cfg)
    pts = shape.sample(1000, rng=cfg.seed)
    res = float(shrinker_residual_pointwise(catalog_differential_data(shape, pts)).max())
    tol = cfg.tol or 1e-12
    out = _report("catalog", {"label": shape.label, "n": shape.n, "k": shape.k}, {
        "radius": shape.r, "F": float(_closed_form_F(shape)), "max_residual": res}, tol, res <= tol, res)
    if cfg.out and cfg.n <= 2:
        # with --out the catalog mesh is written as a SHRNK file
        write_mesh(build_mesh(shape, cfg.R if cfg.R is not None else 5.0, cfg.h), cfg.out)
        out["mesh"] = cfg.out
    return out, out["pass"], None


def _closed_form_F(shape):
    k, r = shape.k, shape.r
    if k == 0:
        return 1.0
    return (4 * np.pi) ** (-k / 2) * sphere_area(k) * r ** k * np.exp(-r * r / 4)


def _cmd_residual(cfg):
    surf = _surface(cfg)
    est = cfg.mesh is not None
    stats = shrinker_residual(surf, estimated=est)
    tol = cfg.tol or (1e-10 if not est else 1e-1)
    out = _report("residual", {"h": cfg.h, "estimated": est},
                  {"max": stats.max, "weighted_l2": stats.weighted_l2}, tol, stats.max <= tol, stats.max)
    return out, out["pass"], None


def _cmd_area(cfg):
    surf = _surface(cfg)
    F = gaussian_area(surf, order=2)
    inputs = {"n": surf.n, "R": surf.R, "h": cfg.h}
    if cfg.mesh is not None:
        out = _report("area", inputs, F, None, True)
        return out, True, None
    ref = gaussian_area(CatalogPiece(_shape(cfg), surf.R))
    tol = cfg.tol or 1e-3
    err = abs(F - ref) / max(abs(ref), 1e-300)
    out = _report("area", inputs, F, tol, err <= tol, err)
    out["reference"] = ref
    return out, out["pass"], None


def _radius_grid(cfg, surf):
    rmax = cfg.rmax if cfg.rmax is not None else surf.R
    if rmax > surf.R + 1e-12:
        raise ConfigError(f"rmax = {rmax} exceeds R = {surf.R}")
    m = int(np.floor(rmax / cfg.step + 1e-9))
    grid = cfg.step * np.arange(1, m + 1)
    extra = [r for r in (cfg.r1, cfg.r2) if r is not None]
    return np.unique(np.concatenate([grid, extra]).round(12))


def _cmd_growth(cfg):
    r1 = 2.0 if cfg.r1 is None else cfg.r1
    n = cfg.n
    if r1 < sqrt(4 + 2 * n) - 1e-12:
        raise ConfigError(f"r1 = {r1} is below sqrt(4 + 2n) = {sqrt(4 + 2 * n):.6f}")
    surf = _surface(cfg)
    radii = _radius_grid(RunConfig(**{**cfg.to_dict(), "r1": r1}), surf)
    prof = growth_profile(surf, radii)
    r2 = cfg.r2 if cfg.r2 is not None else float(radii[-1])
    tol = cfg.tol or (1e-3 if cfg.n <= 2 and cfg.mesh is None else 1e-6)
    checks = []
    for a in radii[radii >= r1 - 1e-12]:
        for b in radii[radii > a]:
            if b <= r2 + 1e-12:
                checks.append(check_volume_growth(prof, a, b, tol=tol).to_json())
    h2 = check_H2_bound(prof, tol=tol)
    ok = all(c["pass"] for c in checks) and bool(np.all(h2))
    summary = {"operation": "growth", "volume_growth_pairs": len(checks),
               "volume_growth_min_slack": min((c["value"] for c in checks), default=None),
               "H2_bound_pass": bool(np.all(h2)), "tolerance": tol, "pass": ok}
    return summary, ok, prof.to_csv(cfg.to_dict())


def _cmd_cutoff(cfg):
    surf = _surface(cfg)
    R = surf.R
    rho = cfg.rho if cfg.rho is not None else 1.0 / (4 * R)
    rng = np.random.default_rng(cfg.seed)
    shape = surf.shape if isinstance(surf, CatalogPiece) else surf.analytic_source
    # points on the surface spread inside B_{R-1}, spaced further than 4 rho
    cand = shape.sample(200 * cfg.points, rng=rng, spread=max(R - 1, 0) / 2)
    cand = cand[np.linalg.norm(cand, axis=1) <= R - 1]
    pts = []
    for p in cand:
        if all(np.linalg.norm(p - q) > 4 * rho for q in pts):
            pts.append(p)
        if len(pts) == cfg.points:
            break
    S = SingularSetProxy(np.array(pts).reshape(len(pts), shape.N), rho)
    phi = build_cutoff(surf, S)
    D, deficiency = cutoff_energy(surf, phi)
    ok = D >= 0 and deficiency >= 0
    out = _report("cutoff", {"rho": rho, "points": len(pts), "centers": S.m},
                  {"dirichlet": D, "deficiency": deficiency}, None, ok)
    return out, ok, None


def _cmd_certify(cfg):
    surf = _surface(cfg)
    n = surf.n
    r1 = cfg.r1 if cfg.r1 is not None else sqrt(4 + 2 * n)
    r2 = cfg.r2 if cfg.r2 is not None else surf.R
    cert = certify_instability(surf, r1, r2)
    out = {"operation": "certify", **cert.to_json(), "pass": True}
    return out, True, None


def _cmd_rn_sweep(cfg):
    if cfg.step > 0.25:
        raise ConfigError("rn-sweep needs --step <= 0.25")
    est = estimate_Rn(cfg.n, step=cfg.step, cap=cfg.cap)
    ok = not np.isnan(est.value)
    summary = {"operation": "rn-sweep", "n": cfg.n, "Rstar": {str(k): v for k, v in est.Rstar.items()},
               "R_n_hat": est.value, "pass": ok}
    return summary, ok, est.to_csv(cfg.to_dict())


def _frankel_pairs(cfg):
    R = cfg.R if cfg.R is not None else 4.0
    if cfg.n != 1:
        raise ConfigError("the frankel command sweeps curves (n = 1)")
    if cfg.pair == "double":
        a = build_mesh(GeneralizedCylinder(1, 1), R, cfg.h)
        b = build_mesh(GeneralizedCylinder(1, 1, radius=1.9), R, cfg.h)
        return R, [("circle", "circle-1.9", a, b)]
    shapes = [("circle", build_mesh(GeneralizedCylinder(1, 1), R, cfg.h))]
    for j in range(8):
        t = np.pi * j / 8
        Q = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        shapes.append((f"line-{j}pi/8", build_mesh(GeneralizedCylinder(1, 0, rotation=Q), R, cfg.h)))
    pairs = []
    for i in range(len(shapes)):
        for j in range(i + 1, len(shapes)):
            pairs.append((shapes[i][0], shapes[j][0], shapes[i][1], shapes[j][1]))
    return R, pairs


def _cmd_frankel(cfg):
    R, pairs = _frankel_pairs(cfg)

    def run(p):
        na, nb, a, b = p
        v = frankel_verdict(a, b, R)
        js = v.to_json()
        js["pair"] = [na, nb]
        if v.verdict == "DisjointEvidence":
            m = v.minimizer
            js["monotone"] = m.monotone()
            js["converged"] = m.converged
            js["complementarity"] = m.complementarity
        return js

    with ThreadPoolExecutor(max_workers=threads()) as pool:
        results = list(pool.map(run, pairs))
    if cfg.pair == "double":
        ok = all(r["verdict"] == "DisjointEvidence" and r["certificate"] and r["certificate"]["fires"]
                 and r["monotone"] for r in results)
    else:
        ok = all(r["verdict"] == "Intersect" for r in results)
    for r in results:
        for w in r["witnesses"]:
            w[2] = [float(x) for x in w[2]]
    out = {"operation": "frankel", "R": R, "pair": cfg.pair, "results": results, "pass": ok}
    return out, ok, None


HANDLERS = {
    "catalog": _cmd_catalog,
    "residual": _cmd_residual,
    "area": _cmd_area,
    "growth": _cmd_growth,
    "cutoff": _cmd_cutoff,
    "certify": _cmd_certify,
    "rn-sweep": _cmd_rn_sweep,
    "frankel": _cmd_frankel,
}


def build_parser():
    p = argparse.ArgumentParser(prog="shrinkerlab", description="Numerical laboratory for self-shrinkers.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--shape", choices=sorted(SHAPE_K))
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--r1", type=float)
    p.add_argument("--r2", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--step", type=float, default=0.25)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rotate", action="store_true", help="apply a seeded random rotation to the shape")
    p.add_argument("--mesh", help="SHRNK mesh file to use instead of a catalog mesh")
    p.add_argument("--rho", type=float, help="cutoff scale for the cutoff command")
    p.add_argument("--points", type=int, default=1, help="singular points for the cutoff command")
    p.add_argument("--cap", type=float, default=20.0, help="largest radius in rn-sweep")
    p.add_argument("--pair", choices=("sweep", "double"), default="sweep",
                   help="frankel: catalog pair sweep or the disjoint test double")
    p.add_argument("--out", help="write the CSV/JSON artifact here")
    return p


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_command(cfg: RunConfig):
    """Run one command; returns ``(exit_status, json_result, csv_text_or_None)``."""
    result, ok, table = HANDLERS[cfg.command](cfg)
    result = {**result, "config": cfg.to_dict()}
    return (0 if ok else 1), result, table


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg_dict = {k: v for k, v in vars(args).items()}
    try:
        cfg = RunConfig(**cfg_dict)
        status, result, table = run_command(cfg)
    except (ShrinkerLabError, FileNotFoundError) as exc:
        fail = {"status": "error", "kind": "config", "error": type(exc).__name__, "message": str(exc),
                "config": cfg_dict}
        print(json.dumps(fail, sort_keys=True))
        return 2
    if status != 0:
        result = {"status": "failed", "kind": "check", **result}
    text = json.dumps(result, sort_keys=True, default=float) + "\n"
    if table is not None:
        _emit(table, args.out)
        # the CSV owns stdout unless it went to a file or a check failed
        if args.out or status != 0:
            sys.stdout.write(text)
    elif cfg.command == "catalog":
        sys.stdout.write(text)
    else:
        _emit(text, args.out)
        if args.out:
            sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
