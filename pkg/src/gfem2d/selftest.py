"""Cheap invariant checks shared by the ``selftest`` subcommand and the tests."""
from __future__ import annotations

import math

import numpy as np

from .analysis import RunOptions, convergence_study, run_case
from .enrichment import SCHEMES, Scheme, build_enrichment_space
from .geometry import Circle, Line
from .mesh import build_mesh, classify_cells
from .problems import patch_problem
from .quadrature import cell_rule, interface_rule


def geometry(tag):
    return {"line": Line, "circle": Circle}[tag]()


def area_error(geom, N, n=6):
    """|sum of all cell-rule weights - 1| over an N x N mesh."""
    mesh = build_mesh(N, 1)
    cut = classify_cells(mesh, geom).cut_set
    total = math.fsum(float(r.w.sum()) for c in range(mesh.n_cells)
                      for r in cell_rule(geom, mesh.box(c), n, c in cut))
    return abs(total - 1.0)


def interface_length(geom, N, n=8):
    mesh = build_mesh(N, 1)
    cls = classify_cells(mesh, geom)
    return math.fsum(float(interface_rule(geom, mesh.box(c), n)[0].w.sum()) for c in cls.I0_el)


def pu_error(geom, N, p, n=None):
    """max |sum of the cut-cell PU functions - 1| at cut-cell quadrature points."""
    mesh = build_mesh(N, p)
    cls = classify_cells(mesh, geom)
    space = build_enrichment_space(mesh, cls, geom, Scheme("hosgfem"))
    n = n or 2 * p + 2
    worst = 0.0
    for c in cls.I0_el:
        for r in cell_rule(geom, mesh.box(c), n, True):
            if r.size == 0:
                continue
            vals = space.pu_values(c, r.x, r.y)
            total = np.sum(list(vals.values()), axis=0)
            worst = max(worst, float(np.abs(total - 1.0).max()))
    return worst


def patch_error(scheme, p, N=5):
    rec, _ = run_case(scheme, p, N, patch_problem(), RunOptions(want_scn=False))
    return rec.energy_error


def run_checks():
    """List of (name, passed, detail) for a fast acceptance subset."""
    from .lemma import verify

    out = []
    worst = max(area_error(geometry(g), N) for g in ("line", "circle") for N in (5, 10))
    out.append(("area", worst <= 1e-12, f"max |area - 1| = {worst:.2e}"))
    err = abs(interface_length(Circle(), 10) - 2 * math.pi / math.sqrt(10))
    out.append(("circle length", err <= 1e-10, f"|L - 2 pi / sqrt(10)| = {err:.2e}"))
    worst = max(pu_error(geometry(g), 5, p) for g in ("line", "circle") for p in range(1, 6))
    out.append(("partition of unity", worst <= 1e-12, f"max error {worst:.2e}"))
    worst = max(patch_error(s, p) for s in SCHEMES for p in (1, 2))
    out.append(("patch test", worst <= 1e-8, f"max energy error {worst:.2e}"))
    flat = max(r.residual for r in verify("line", 3))
    circ = max(r.residual for r in verify("circle", 3))
    out.append(("lemma recursion", flat <= 1e-8 and circ <= 1e-4,
                f"flat {flat:.2e}, circle {circ:.2e}"))
    _, slope = convergence_study("hosgfem", 2, "line", 1.0, 10.0, [5, 10, 20],
                                 RunOptions(want_scn=False))
    out.append(("hosgfem p=2 rate", abs(slope - 2) <= 0.35, f"slope {slope:.3f}"))
    return out
