"""Zero-mean solve of the singular Neumann system and scaled condition numbers."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ZERO_FUNCTION_TOL, jacobi_scale

logger = logging.getLogger(__name__)

NULLSPACE_CUTOFF = 1e-12  # relative to lambda_max
DENSE_LIMIT = 4000
DEPENDENCY_TOL = 1e-10  # pivot of the unit-diagonal scaled matrix
EIG_SEED = 20240607


class SingularSystemError(RuntimeError):
    pass


def dependent_columns(Kh, pin=0, tol=None):
    """Columns of a unit-diagonal PSD matrix that are numerically dependent on
    the others.

    Symmetric elimination with diagonal pivots: a pivot is the squared
    distance (in the K-inner product) of a function to the span of the
    functions eliminated before it, so a near-zero pivot marks a function
    that adds nothing to the space.  Column ``pin`` is removed beforehand to
    take out the constant kernel of the Neumann operator.
    """
    tol = DEPENDENCY_TOL if tol is None else tol
    n = Kh.shape[0]
    keep = np.ones(n, bool)
    keep[pin] = False
    sub = Kh.tocsc()[keep][:, keep].tocsc()
    # a shift far below tol keeps exact dependencies from stopping the factorisation
    sub = (sub + 1e-3 * tol * sp.identity(n - 1, format="csc")).tocsc()
    try:
        lu = spla.splu(sub, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError:
        return None
    piv = np.abs(lu.U.diagonal())[lu.perm_c]
    idx = np.flatnonzero(keep)
    return idx[piv < tol]


def _live_columns(K):
    """Columns carrying energy; a zero-energy column is a vanishing function."""
    diag = K.diagonal()
    return diag > ZERO_FUNCTION_TOL * max(diag.max(initial=0.0), 0.0)


def _scale_live(K, F, live):
    # Jacobi scaling restricted to live columns; dead ones get d = 0
    d = np.zeros(K.shape[0])
    d[live] = 1.0 / np.sqrt(K.diagonal()[live])
    D = sp.diags(d)
    Kh = (D @ K @ D).tocsr()
    Fh = None if F is None else d * F
    return Kh, Fh, d


def solve_zero_mean(system, refine=3, deflate=True):
    """Solve K U = F subject to m^T U = 0 through a bordered system.

    The bordered matrix is Jacobi scaled before factorisation (enrichment
    diagonals can be many orders of magnitude below the FEM ones) and the
    solution is polished by a few steps of iterative refinement.  Enrichment
    sets with exact linear dependencies (GFEM / CGFEM at higher p) are first
    reduced to an independent subset, which leaves the discrete space and
    hence the discrete solution unchanged.  ``info`` records the path taken.
    """
    K, F, m = system.K.tocsr(), np.asarray(system.F, float), np.asarray(system.mean, float)
    n = K.shape[0]
    live = _live_columns(K)
    Kh, Fh, d = _scale_live(K, F, live)
    ms = d * m
    info = {"path": "splu", "deflated": int(n - live.sum())}
    cols = np.flatnonzero(live)
    n_fem = getattr(system, "n_fem", n)
    if deflate and n > n_fem:
        sub = Kh[cols][:, cols]
        dep = dependent_columns(sub)
        if dep is None:
            info["path"] = "lstsq"
        elif len(dep):
            cols = np.delete(cols, dep)
            info["deflated"] += int(len(dep))
    mscale = np.linalg.norm(ms[cols])
    if not mscale > 0:
        raise SingularSystemError("mean functional vanishes")
    Kc = Kh[cols][:, cols].tolil()
    Kc.setdiag(1.0)
    Kc = Kc.tocsr()
    mc = sp.csr_matrix((ms[cols] / mscale).reshape(-1, 1))
    As = sp.bmat([[Kc, mc], [mc.T, None]], format="csc")
    b = np.append(Fh[cols], 0.0)
    x = None
    if info["path"] == "splu":
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                lu = spla.splu(As)
                x = lu.solve(b)
                for _ in range(refine):
                    x = x + lu.solve(b - As @ x)
            if not np.all(np.isfinite(x)):
                x = None
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            logger.debug("bordered factorisation failed: %s", exc)
    bscale = max(np.abs(b).max(initial=0.0), 1e-300)
    if x is None or np.abs(As @ x - b).max() > 1e-8 * bscale:
        info["path"] = "lstsq"
        x, *_ = la.lstsq(As.toarray(), b, cond=1e-14, lapack_driver="gelsd")
    U = np.zeros(n)
    U[cols] = d[cols] * x[: len(cols)]
    if not np.all(np.isfinite(U)):
        raise SingularSystemError("augmented system could not be solved")
    scale = max(np.abs(F).max(initial=0.0), 1e-300)
    info["residual"] = float(np.abs(K @ U - F).max() / scale)
    info["mean"] = float(m @ U)
    return U, info


@dataclass
class ConditionEstimate:
    scn: float
    lam_max: float
    lam_min: float
    method: str
    capped: bool = False  # lambda_min fell to the nullspace cutoff
    converged: bool = True
    zero_columns: int = 0  # vanishing functions left out of the spectrum

    def as_dict(self):
        return dict(self.__dict__)


def _dense_spectrum(Kh, w):
    A = Kh.toarray() if sp.issparse(Kh) else np.asarray(Kh)
    lam = la.eigvalsh(A)
    lam_max = lam[-1]
    if w is not None:
        # shift the known kernel direction to the top of the spectrum
        wn = w / np.linalg.norm(w)
        lam = la.eigvalsh(A + 2 * lam_max * np.outer(wn, wn))
    return lam, lam_max


def scaled_condition_number(K, kernel=None, n_fem=None, dense_limit=DENSE_LIMIT,
                            method="auto", tol=1e-8):
    """SCN of the Jacobi-scaled matrix ``D K D``.

    ``K`` may be the raw stiffness or an assembled system.  ``kernel`` is the
    known null vector of K (the FEM constant); by default it is built from
    ``n_fem`` when provided.  lambda_min is the smallest eigenvalue after the
    kernel is deflated, but never below ``NULLSPACE_CUTOFF * lambda_max``.
    """
    if hasattr(K, "K"):
        n_fem = K.n_fem if n_fem is None else n_fem
        K = K.K
    K = sp.csr_matrix(K)
    live = _live_columns(K)
    w = None
    if kernel is not None:
        w = np.asarray(kernel, float)[live]
    elif n_fem is not None:
        w = np.zeros(K.shape[0])
        w[:n_fem] = 1.0
        w = w[live]
    K = K[live][:, live]
    Kh, _, d = jacobi_scale(K)
    n = Kh.shape[0]
    if w is not None:
        w = w / d
    if method == "auto":
        method = "dense" if n <= dense_limit else "iterative"
    if method == "dense":
        lam, lam_max = _dense_spectrum(Kh, w)
        lam_min = lam[0]
        conv = True
    else:
        lam_max, lam_min, conv = _iterative_extremes(Kh, w, tol)
    floor = NULLSPACE_CUTOFF * lam_max
    capped = bool(lam_min < floor)
    lam_min = max(lam_min, floor)
    return ConditionEstimate(lam_max / lam_min, float(lam_max), float(lam_min), method, capped, conv,
                             int((~live).sum()))


def _iterative_extremes(Kh, w, tol):
    n = Kh.shape[0]
    rng = np.random.default_rng(EIG_SEED)
    v0 = rng.standard_normal(n)
    conv = True
    try:
        lam_max = float(spla.eigsh(Kh, k=1, which="LA", tol=tol, v0=v0,
                                   return_eigenvectors=False)[0])
    except spla.ArpackNoConvergence as exc:
        conv = False
        lam_max = float(np.max(exc.eigenvalues)) if len(exc.eigenvalues) else float(spla.norm(Kh, 1))
    if w is None:
        w = np.zeros(n)
    wn = w / np.linalg.norm(w) if np.any(w) else w
    # pseudo-inverse on the complement of the kernel through a bordered solve
    A = sp.bmat([[Kh, sp.csr_matrix(wn.reshape(-1, 1))], [sp.csr_matrix(wn.reshape(1, -1)), None]],
                format="csc")
    try:
        lu = spla.splu(A)
    except RuntimeError:
        return lam_max, 0.0, False

    def apply(x):
        x = x - wn * (wn @ x)
        y = lu.solve(np.append(x, 0.0))[:n]
        return y - wn * (wn @ y)

    op = spla.LinearOperator((n, n), matvec=apply, dtype=float)
    v1 = v0 - wn * (wn @ v0)
    try:
        mu = float(spla.eigsh(op, k=1, which="LA", tol=tol, v0=v1, return_eigenvectors=False)[0])
    except spla.ArpackNoConvergence as exc:
        conv = False
        mu = float(np.max(exc.eigenvalues)) if len(exc.eigenvalues) else np.inf
    if not np.isfinite(mu) or mu <= 0:
        return lam_max, 0.0, False
    return lam_max, 1.0 / mu, conv
