"""Unfitted-interface finite elements with enriched partition-of-unity spaces.

Five discretisations of a two-material Neumann problem on uniform
quadrilateral meshes of the unit square: plain FEM, GFEM, corrected GFEM,
stable GFEM with local principal component condensation, and a high-order
stable GFEM built on cut-cell Bernstein partitions of unity.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    ExperimentRecord, RunOptions, convergence_study, energy_error, robustness_sweep, run_case,
    scn_study,
)
from .enrichment import SCHEMES, Scheme  # noqa: E402
from .geometry import Circle, HLine, Line, make_geometry  # noqa: E402
from .mesh import build_mesh, classify_cells  # noqa: E402
from .problems import circle_problem, line_problem, patch_problem  # noqa: E402

__all__ = [
    "SCHEMES", "Circle", "ExperimentRecord", "HLine", "Line", "RunOptions", "Scheme",
    "build_mesh", "circle_problem", "classify_cells", "convergence_study", "energy_error",
    "line_problem", "make_geometry", "patch_problem", "robustness_sweep", "run_case",
    "scn_study",
]
