"""Energy errors, rate fits and the experiment drivers behind the CLI."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .assembly import CellRules, QuadConfig, assemble, cell_basis
from .basis import tensor_eval
from .enrichment import Scheme, build_enrichment_space
from .mesh import build_mesh, classify_cells
from .problems import make_problem, robustness_config, robustness_delta
from .quadrature import tensor_rule
from .solver import scaled_condition_number, solve_zero_mean

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scheme", "p", "N", "kappa0", "kappa1", "geom", "delta",
    "energy_error", "scn", "n_fem", "n_enr", "dropped", "seconds",
)


@dataclass
class ExperimentRecord:
    scheme: str
    p: int
    N: int
    kappa0: float
    kappa1: float
    geom: str
    delta: float | None = None
    energy_error: float = math.nan
    scn: float = math.nan
    n_fem: int = 0
    n_enr: int = 0
    dropped: int = 0
    seconds: float | None = 0.0  # None leaves the CSV cell empty
    status: str = "ok"

    def row(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return f"{v:.17g}"
            return str(v)

        d = asdict(self)
        return [fmt(d[c]) for c in CSV_COLUMNS]


def error_order(p, bump=0):
    return 4 * p + 4 + bump


def energy_error(U_raw, problem, mesh, space, quad: QuadConfig | None = None, order=None):
    """sqrt(sum over cells and sides of kappa |grad u - grad u_h|^2).

    ``U_raw`` holds FEM coefficients followed by raw enrichment coefficients.
    """
    quad = quad or QuadConfig()
    p = mesh.p
    order = order or error_order(p, quad.bump)
    geom = problem.geom
    cls = space.classification
    n_fem = mesh.n_nodes
    special = np.union1d(cls.I0_el, space.support_cells).astype(int)
    mask = np.ones(mesh.n_cells, bool)
    mask[special] = False
    plain = np.flatnonzero(mask)
    total = 0.0
    U_raw = np.asarray(U_raw, float)
    if len(plain):
        ref = tensor_rule((0.0, 1.0, 0.0, 1.0), order)
        _, gs, gt = tensor_eval("lagrange", p, ref.x, ref.y)
        h = mesh.h
        loc = U_raw[mesh.cell_nodes[plain]]
        ghx = loc @ gs / h
        ghy = loc @ gt / h
        org = mesh.cell_origin[plain]
        X = org[:, :1] + h * ref.x[None, :]
        Y = org[:, 1:] + h * ref.y[None, :]
        side = np.repeat(geom.classify(*mesh.centroids[plain].T)[:, None], ref.size, axis=1)
        gx, gy = problem.grad(X, Y, side)
        e2 = problem.kappa(side) * ((gx - ghx) ** 2 + (gy - ghy) ** 2)
        total += float((e2 @ ref.w).sum()) * h * h
    rules = CellRules(mesh, geom, cls, order)
    for c in special:
        r = rules(c)
        if r.size == 0:
            continue
        dofs, _, bx, by = cell_basis(mesh, space, n_fem, c, r.x, r.y, r.side)
        coef = U_raw[dofs]
        gx, gy = problem.grad(r.x, r.y, r.side)
        e2 = problem.kappa(r.side) * ((gx - coef @ bx) ** 2 + (gy - coef @ by) ** 2)
        total += float(e2 @ r.w)
    return math.sqrt(max(total, 0.0))


def fit_slope(N, values, last=3):
    """Least-squares slope of log(value) against log(1/N) over the last points."""
    N = np.asarray(N, float)[-last:]
    v = np.asarray(values, float)[-last:]
    if len(N) < 2 or np.any(v <= 0) or not np.all(np.isfinite(v)):
        return math.nan
    A = np.column_stack([np.log(1.0 / N), np.ones(len(N))])
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    return float(coef[0])


def pairwise_rates(N, values):
    N = np.asarray(N, float)
    v = np.asarray(values, float)
    return [float(np.log(v[i] / v[i + 1]) / np.log(N[i + 1] / N[i])) for i in range(len(N) - 1)]


@dataclass
class RunOptions:
    lpca_xi: float | None = 1e-15
    orthogonalize: str = "on"
    one_sided: bool = True
    quad_bump: int = 0
    want_error: bool = True
    want_scn: bool = True
    dump_matrix: str | None = None

    def scheme(self, name):
        return Scheme(name, self.lpca_xi, self.orthogonalize, self.one_sided)


def run_case(scheme, p, N, problem, options: RunOptions | None = None):
    """Assemble, solve and measure one configuration; returns (record, extras)."""
    options = options or RunOptions()
    t0 = time.perf_counter()
    mesh = build_mesh(N, p)
    cls = classify_cells(mesh, problem.geom)
    space = build_enrichment_space(mesh, cls, problem.geom, options.scheme(scheme))
    quad = QuadConfig(options.quad_bump)
    system = assemble(mesh, space, problem, quad)
    if options.dump_matrix:
        system.dump(options.dump_matrix)
    rec = ExperimentRecord(
        scheme=scheme, p=p, N=N, kappa0=problem.kappa0, kappa1=problem.kappa1,
        geom=problem.name, delta=problem.delta, n_fem=system.n_fem,
        n_enr=system.n_enr, dropped=system.dropped,
    )
    extras = {"system": system, "space": space, "mesh": mesh}
    if options.want_error and problem.exact:
        U, info = solve_zero_mean(system)
        extras["solve"] = info
        extras["U"] = U
        rec.energy_error = energy_error(system.raw_coefficients(U), problem, mesh, space, quad)
    if options.want_scn:
        est = scaled_condition_number(system)
        extras["scn"] = est
        rec.scn = est.scn
    rec.seconds = time.perf_counter() - t0
    return rec, extras


def _safe_run(scheme, p, N, problem, options):
    try:
        rec, _ = run_case(scheme, p, N, problem, options)
    except Exception as exc:  # a failed row must not abort a study
        logger.warning("run %s p=%d N=%d failed: %s", scheme, p, N, exc)
        rec = ExperimentRecord(scheme, p, N, problem.kappa0, problem.kappa1, problem.name,
                               problem.delta, status=f"failed: {exc}")
    return rec


def run_many(tasks, jobs=1):
    """Run (scheme, p, N, problem, options) tuples; results keep task order."""
    tasks = list(tasks)
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [_safe_run(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_safe_run, *zip(*tasks)))


def _check_n_list(N_list, minimum):
    N_list = [int(n) for n in N_list]
    if len(N_list) < minimum or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError(f"N list must be strictly increasing with at least {minimum} entries")
    return N_list


def convergence_study(scheme, p, geom, kappa0, kappa1, N_list, options=None, jobs=1):
    """Records for every N plus the slope fitted over the last three N."""
    N_list = _check_n_list(N_list, 3)
    options = RunOptions(**{**asdict(options or RunOptions()), "want_error": True})
    problem = make_problem(geom, kappa0, kappa1)
    records = run_many([(scheme, p, N, problem, options) for N in N_list], jobs)
    errs = [r.energy_error for r in records]
    return records, fit_slope(N_list, errs)


def scn_study(scheme, p, geom, kappa0, kappa1, N_list, options=None, jobs=1):
    """Records for every N plus the growth exponent of SCN in N (all points)."""
    N_list = _check_n_list(N_list, 2)
    options = RunOptions(**{**asdict(options or RunOptions()), "want_error": False, "want_scn": True})
    problem = make_problem(geom, kappa0, kappa1)
    records = run_many([(scheme, p, N, problem, options) for N in N_list], jobs)
    return records, -fit_slope(N_list, [r.scn for r in records], last=len(N_list))


def robustness_sweep(schemes, p, N=40, i_range=range(1, 16), kappa0=1.0, kappa1=10.0,
                     options=None, jobs=1):
    options = RunOptions(**{**asdict(options or RunOptions()), "want_error": False, "want_scn": True})
    tasks = [(name, p, N, robustness_config(robustness_delta(i), kappa0, kappa1), options)
             for name in schemes for i in i_range]
    return run_many(tasks, jobs)


def sort_records(records):
    return sorted(records, key=lambda r: (r.geom, r.scheme, r.p, r.delta or 0.0, r.N))


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
