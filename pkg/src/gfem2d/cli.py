"""Command-line experiment runner.

Subcommands: converge, scn, robustness, verify-lemma1, selftest.  Every run
writes a CSV, a JSON metadata sidecar and (unless --no-plot) an SVG chart
into --out.  Exit status: 0 success, 2 selftest threshold violated,
1 any other error (including bad arguments).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    RunOptions, convergence_study, fit_slope, robustness_sweep, run_many, scn_study,
    sort_records, write_csv,
)
from .assembly import ZERO_FUNCTION_TOL, QuadConfig
from .enrichment import SCHEMES
from .problems import make_problem, robustness_config, robustness_delta
from .report import write_svg
from .solver import DENSE_LIMIT, DEPENDENCY_TOL, EIG_SEED, NULLSPACE_CUTOFF

logger = logging.getLogger("gfem2d")

GEOMS = ("line", "circle", "hline")
DEFAULTS = {
    "scheme": "hosgfem",
    "schemes": ",".join(SCHEMES),
    "p": 3,
    "N": None,  # per subcommand
    "geom": None,
    "kappa": None,
    "delta_i": "1..15",
    "lpca_xi": 1e-15,
    "orthogonalize": "on",
    "distance": "onesided",
    "out": "results",
    "quad_order_bump": 0,
    "dump_matrix": False,
    "jobs": None,
    "timing": False,
    "no_plot": False,
    "verbose": False,
}
SUB_DEFAULTS = {
    "converge": {"N": "10,20,40", "geom": "line"},
    "scn": {"N": "5,10,20,40", "geom": "line"},
    "robustness": {"N": "40", "geom": "hline"},
    "verify-lemma1": {"geom": "circle"},
    "selftest": {},
}
DEFAULT_KAPPA = {"line": "1,10", "circle": "1,20", "hline": "1,10"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    a = common.add_argument
    a("--config", help="JSON file with option values; command-line flags take precedence")
    a("--scheme", help=f"one of {', '.join(SCHEMES)}")
    a("--schemes", help="comma list of schemes (robustness)")
    a("--p", type=int, help="polynomial degree 1..5")
    a("--N", help="comma list of mesh sizes")
    a("--geom", help="line, circle or hline")
    a("--kappa", help="k0,k1")
    a("--delta-i", "--i", dest="delta_i", help="index range a..b, delta = 0.03 * 2^-i")
    a("--lpca-xi", dest="lpca_xi", type=float, help="LPCA threshold for SGFEM")
    a("--orthogonalize", choices=("auto", "on", "off"),
      help="local Gram-Schmidt for HoSGFEM (auto: only p >= 5)")
    a("--distance", choices=("onesided", "twosided"), help="HoSGFEM distance flavour")
    a("--out", help="output directory")
    a("--quad-order-bump", dest="quad_order_bump", type=int, help="raise all quadrature orders")
    a("--dump-matrix", dest="dump_matrix", action="store_const", const=True,
      help="write each stiffness matrix as 'row col value' text")
    a("--jobs", type=int, help="worker processes (default: available cores)")
    a("--timing", action="store_const", const=True,
      help="record wall-clock seconds in the CSV (makes it run-dependent)")
    a("--no-plot", dest="no_plot", action="store_const", const=True, help="skip SVG output")
    a("-v", "--verbose", action="store_const", const=True)

    parser = _Parser(prog="gfem2d", description="Unfitted interface FEM experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("converge", parents=[common], help="energy error vs N")
    sub.add_parser("scn", parents=[common], help="scaled condition number vs N")
    sub.add_parser("robustness", parents=[common], help="SCN vs interface offset delta")
    sub.add_parser("verify-lemma1", parents=[common], help="Taylor recursion residual table")
    sub.add_parser("selftest", parents=[common], help="fast acceptance checks")
    return parser


def resolve(args) -> dict:
    """Merge defaults < subcommand defaults < config file < flags."""
    opts = dict(DEFAULTS)
    opts.update(SUB_DEFAULTS[args.command])
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in cfg.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            if isinstance(val, list):
                val = ",".join(str(v) for v in val)
            opts[k] = val
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if opts["geom"] and opts["geom"] not in GEOMS:
        raise UsageError(f"unknown geometry {opts['geom']!r}; expected one of {GEOMS}")
    if opts["kappa"] is None and opts["geom"]:
        opts["kappa"] = DEFAULT_KAPPA[opts["geom"]]
    for name in [opts["scheme"], *_split(opts["schemes"], str)]:
        if name not in SCHEMES:
            raise UsageError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
    if not 1 <= int(opts["p"]) <= 5:
        raise UsageError("p must be in 1..5")
    opts["p"] = int(opts["p"])
    if opts["jobs"] is None:
        opts["jobs"] = os.cpu_count() or 1
    return opts


def _split(text, cast):
    if text is None:
        return []
    if isinstance(text, (int, float)):
        return [cast(text)]
    try:
        return [cast(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad list {text!r}") from exc


def _range(text):
    try:
        a, b = str(text).split("..")
        a, b = int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}; expected a..b") from exc
    if b < a:
        raise UsageError(f"empty range {text!r}")
    return range(a, b + 1)


def _kappa(opts):
    k = _split(opts["kappa"], float)
    if len(k) != 2 or min(k) <= 0:
        raise UsageError("--kappa expects two positive values k0,k1")
    return k


def _run_options(opts, dump_dir=None):
    return RunOptions(
        lpca_xi=float(opts["lpca_xi"]),
        orthogonalize=opts["orthogonalize"],
        one_sided=opts["distance"] == "onesided",
        quad_bump=int(opts["quad_order_bump"]),
        dump_matrix=dump_dir,
    )


def _metadata(opts, extra):
    q = QuadConfig(int(opts["quad_order_bump"]))
    return {
        "command": opts["command"],
        "options": {k: v for k, v in opts.items() if k != "command"},
        "versions": {"gfem2d": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "tolerances": {"nullspace_cutoff": NULLSPACE_CUTOFF, "dependency_tol": DEPENDENCY_TOL,
                       "zero_function_tol": ZERO_FUNCTION_TOL, "dense_eig_limit": DENSE_LIMIT,
                       "lpca_xi": float(opts["lpca_xi"])},
        "quadrature": {str(p): q.as_dict(p) for p in range(1, 6)},
        "seeds": {"eigsh": EIG_SEED},
        **extra,
    }


def _emit(opts, stem, records, meta, plot=None):
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    records = sort_records(records)
    if not opts["timing"]:
        for r in records:
            r.seconds = None
    write_csv(records, out / f"{stem}.csv")
    with open(out / f"{stem}.json", "w") as fh:
        json.dump(_metadata(opts, meta), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    if plot and not opts["no_plot"]:
        write_svg(out / f"{stem}.svg", *plot)
    failed = [r for r in records if r.status != "ok"]
    for r in failed:
        logger.error("%s p=%d N=%d: %s", r.scheme, r.p, r.N, r.status)
    return 1 if failed else 0


def _dump_dir(opts, stem):
    if not opts["dump_matrix"]:
        return None
    d = Path(opts["out"]) / f"{stem}_matrices"
    d.mkdir(parents=True, exist_ok=True)
    return str(d)


def _per_run_options(opts, stem, scheme, p, N, tag=""):
    base = _dump_dir(opts, stem)
    path = None if base is None else os.path.join(base, f"{scheme}_p{p}_N{N}{tag}.txt")
    return _run_options(opts, path)


def cmd_converge(opts):
    k0, k1 = _kappa(opts)
    Ns = _split(opts["N"], int)
    scheme, p, geom = opts["scheme"], opts["p"], opts["geom"]
    if geom == "hline":
        raise UsageError("convergence needs an exact solution (line or circle)")
    stem = f"converge_{scheme}_p{p}_{geom}"
    if len(Ns) < 3:
        raise UsageError("converge needs at least three N values")
    records, slope = _study(convergence_study, opts, stem, scheme, p, geom, k0, k1, Ns)
    for r in records:
        print(f"{scheme} p={p} N={r.N:4d} energy_error={r.energy_error:.6e}")
    print(f"slope {slope:.4f}")
    plot = ({scheme: ([r.N for r in records], [r.energy_error for r in records])},
            "N", "energy error", f"{scheme} p={p} {geom}")
    return _emit(opts, stem, records, {"slope": slope}, plot)


def cmd_scn(opts):
    k0, k1 = _kappa(opts)
    Ns = _split(opts["N"], int)
    scheme, p, geom = opts["scheme"], opts["p"], opts["geom"]
    stem = f"scn_{scheme}_p{p}_{geom}"
    if len(Ns) < 2:
        raise UsageError("scn needs at least two N values")
    records, slope = _study(scn_study, opts, stem, scheme, p, geom, k0, k1, Ns)
    for r in records:
        print(f"{scheme} p={p} N={r.N:4d} scn={r.scn:.6e}")
    print(f"slope {slope:.4f}")
    plot = ({scheme: ([r.N for r in records], [r.scn for r in records])},
            "N", "scaled condition number", f"{scheme} p={p} {geom}")
    return _emit(opts, stem, records, {"slope": slope}, plot)


def _study(fn, opts, stem, scheme, p, geom, k0, k1, Ns):
    if not opts["dump_matrix"]:
        return fn(scheme, p, geom, k0, k1, Ns, _run_options(opts), jobs=opts["jobs"])
    # one options object per N so each matrix lands in its own file
    want_error = fn is convergence_study
    problem = make_problem(geom, k0, k1)
    tasks = []
    for N in Ns:
        o = _per_run_options(opts, stem, scheme, p, N)
        o.want_error, o.want_scn = want_error, not want_error
        tasks.append((scheme, p, N, problem, o))
    records = run_many(tasks, opts["jobs"])
    if want_error:
        return records, fit_slope(Ns, [r.energy_error for r in records])
    return records, -fit_slope(Ns, [r.scn for r in records], last=len(Ns))


def cmd_robustness(opts):
    k0, k1 = _kappa(opts)
    p = opts["p"]
    Ns = _split(opts["N"], int)
    if len(Ns) != 1:
        raise UsageError("robustness uses a single N")
    N = Ns[0]
    schemes = _split(opts["schemes"], str)
    irange = _range(opts["delta_i"])
    stem = f"robustness_p{p}_N{N}"
    if opts["dump_matrix"]:
        tasks = []
        for name in schemes:
            for i in irange:
                o = _per_run_options(opts, stem, name, p, N, f"_i{i}")
                o.want_error, o.want_scn = False, True
                tasks.append((name, p, N, robustness_config(robustness_delta(i), k0, k1), o))
        records = run_many(tasks, opts["jobs"])
    else:
        records = robustness_sweep(schemes, p, N, irange, k0, k1, _run_options(opts),
                                   jobs=opts["jobs"])
    for r in records:
        print(f"{r.scheme:8s} delta={r.delta:.3e} scn={r.scn:.6e}")
    series = {}
    for s in schemes:
        rows = [r for r in records if r.scheme == s]
        series[s] = ([r.delta for r in rows], [r.scn for r in rows])
    plot = (series, "delta", "scaled condition number", f"p={p} N={N}")
    meta = {"deltas": {str(i): robustness_delta(i) for i in irange}}
    return _emit(opts, stem, records, meta, plot)


def cmd_verify_lemma(opts):
    from .lemma import verify

    geom, p = opts["geom"], opts["p"]
    rows = verify(geom, p)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'point':>26s} {'p':>2s} {'residual':>12s} {'fd_error':>12s} {'c00':>12s}")
    for r in rows:
        pt = f"({r.point[0]:.6f}, {r.point[1]:.6f})"
        print(f"{pt:>26s} {r.p:2d} {r.residual:12.3e} {r.fd_error:12.3e} {r.c00:12.5e}")
    worst = max(r.residual for r in rows)
    print(f"max residual {worst:.3e}")
    with open(out / f"lemma_{geom}_p{p}.csv", "w") as fh:
        fh.write("x,y,p,residual,fd_error,c00\n")
        for r in rows:
            fh.write(f"{r.point[0]:.17g},{r.point[1]:.17g},{r.p},{r.residual:.17g},"
                     f"{r.fd_error:.17g},{r.c00:.17g}\n")
    with open(out / f"lemma_{geom}_p{p}.json", "w") as fh:
        json.dump(_metadata(opts, {"max_residual": worst}), fh, indent=2, sort_keys=True,
                  default=str)
        fh.write("\n")
    return 0


def cmd_selftest(opts):
    from .selftest import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "selftest.json", "w") as fh:
        json.dump(_metadata(opts, {"checks": [
            {"name": n, "pass": bool(ok), "detail": d} for n, ok, d in results]}),
            fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return 0 if all(ok for _, ok, _ in results) else 2


COMMANDS = {
    "converge": cmd_converge,
    "scn": cmd_scn,
    "robustness": cmd_robustness,
    "verify-lemma1": cmd_verify_lemma,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = resolve(args)
        opts["command"] = args.command
        logging.basicConfig(level=logging.DEBUG if opts["verbose"] else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gfem2d: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:
        logger.debug("failure", exc_info=True)
        print(f"gfem2d: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
