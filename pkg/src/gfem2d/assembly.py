"""Galerkin assembly of the FEM + enrichment block system.

FEM unknowns come first (one per global Lagrange node), followed by the
enrichment unknowns.  Raw enrichment functions are assembled first; local
basis changes (Gram-Schmidt, LPCA) and the removal of identically vanishing
functions are then applied as a congruence ``T^T K T`` with a block-diagonal
``T`` that is the identity on the FEM block.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import reference_integrals, reference_stiffness, tensor_eval
from .enrichment import gram_schmidt_local, lpca_condense
from .quadrature import boundary_rule, cell_rule, interface_rule, tagged, tensor_rule

logger = logging.getLogger(__name__)

ZERO_FUNCTION_TOL = 1e-24  # relative to the largest diagonal entry


@dataclass(frozen=True)
class QuadConfig:
    """Gauss points per direction; ``bump`` raises every order uniformly."""

    bump: int = 0

    def plain(self, p):
        return p + 2 + self.bump

    def enriched(self, p):
        return 2 * p + 2 + self.bump

    def line(self, p):
        return 2 * p + 2 + self.bump

    def gram(self, p):
        # local inner products need more points than the stiffness to stay
        # orthonormal to 1e-8 at p = 5
        return 4 * p + 4 + self.bump

    def as_dict(self, p):
        return {"plain": self.plain(p), "enriched": self.enriched(p), "line": self.line(p),
                "gram": self.gram(p)}


class CellRules:
    """Cache of side-tagged rules for the cells that need the special path."""

    def __init__(self, mesh, geom, classification, order):
        self.mesh = mesh
        self.geom = geom
        self.cut = classification.cut_set
        self.order = order
        self._cache = {}

    def __call__(self, cell):
        cell = int(cell)
        if cell not in self._cache:
            rules = cell_rule(self.geom, self.mesh.box(cell), self.order, cell in self.cut)
            self._cache[cell] = tagged(rules)
        return self._cache[cell]


def fem_eval(mesh, cell, x, y):
    org = mesh.cell_origin[cell]
    h = mesh.h
    v, gs, gt = tensor_eval("lagrange", mesh.p, (x - org[0]) / h, (y - org[1]) / h)
    return v, gs / h, gt / h


def cell_basis(mesh, space, n_fem, cell, x, y, side):
    """All basis functions touching ``cell`` in the raw global numbering."""
    v, gx, gy = fem_eval(mesh, cell, x, y)
    dofs = mesh.cell_nodes[cell]
    if space is not None and space.groups:
        edofs, ev, egx, egy = space.evaluate(cell, x, y, side)
        if len(edofs):
            dofs = np.concatenate([dofs, n_fem + edofs])
            v = np.vstack([v, ev])
            gx = np.vstack([gx, egx])
            gy = np.vstack([gy, egy])
    return dofs, v, gx, gy


@dataclass
class BlockLinearSystem:
    K: sp.csr_matrix
    F: np.ndarray
    mean: np.ndarray  # integral of each basis function over the domain
    n_fem: int
    n_enr: int
    T: sp.csr_matrix  # raw coefficients = T @ final coefficients
    n_raw_enr: int
    dropped: int = 0
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.n_fem + self.n_enr

    @property
    def K11(self):
        return self.K[: self.n_fem, : self.n_fem]

    @property
    def K12(self):
        return self.K[: self.n_fem, self.n_fem:]

    @property
    def K22(self):
        return self.K[self.n_fem:, self.n_fem:]

    @property
    def F1(self):
        return self.F[: self.n_fem]

    @property
    def F2(self):
        return self.F[self.n_fem:]

    def raw_coefficients(self, U):
        return self.T @ U

    def dump(self, path):
        """Coordinate text dump: 0-based ``row col value`` per line."""
        coo = self.K.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


def jacobi_scale(system_or_K, F=None):
    """Return (K_hat, F_hat, D) with K_hat = D K D and D_ii = K_ii^(-1/2)."""
    if isinstance(system_or_K, BlockLinearSystem):
        K, F = system_or_K.K, system_or_K.F
    else:
        K = sp.csr_matrix(system_or_K)
    diag = K.diagonal()
    bad = np.flatnonzero(~(diag > 0))
    if len(bad):
        raise ValueError(f"non-positive diagonal entry at DOF {int(bad[0])}: {diag[bad[0]]!r}")
    d = 1.0 / np.sqrt(diag)
    D = sp.diags(d)
    Kh = (D @ K @ D).tocsr()
    Kh.setdiag(1.0)
    Fh = None if F is None else d * F
    return Kh, Fh, d


def _plain_cells(mesh, classification, special):
    mask = np.ones(mesh.n_cells, bool)
    mask[special] = False
    return np.flatnonzero(mask)


def assemble(mesh, space, problem, quad: QuadConfig | None = None) -> BlockLinearSystem:
    quad = quad or QuadConfig()
    p = mesh.p
    geom = problem.geom
    cls = space.classification
    n_fem = mesh.n_nodes
    n_raw = space.n_raw
    n = n_fem + n_raw
    special = np.union1d(cls.I0_el, space.support_cells).astype(int)
    plain = _plain_cells(mesh, cls, special)
    rules = CellRules(mesh, geom, cls, quad.enriched(p))

    rows, cols, vals = [], [], []
    F = np.zeros(n)
    mean = np.zeros(n)

    # plain cells: exact polynomial stiffness, tensor Gauss loads
    if len(plain):
        Kref = reference_stiffness(p)
        cx, cy = mesh.centroids[plain].T
        side = geom.classify(cx, cy)
        kap = problem.kappa(side)
        nodes = mesh.cell_nodes[plain]
        nl = nodes.shape[1]
        rows.append(np.repeat(nodes, nl, axis=1).ravel())
        cols.append(np.tile(nodes, (1, nl)).ravel())
        vals.append((kap[:, None, None] * Kref[None]).ravel())
        ref = tensor_rule((0.0, 1.0, 0.0, 1.0), quad.plain(p))
        L, _, _ = tensor_eval("lagrange", p, ref.x, ref.y)
        h = mesh.h
        org = mesh.cell_origin[plain]
        X = org[:, :1] + h * ref.x[None, :]
        Y = org[:, 1:] + h * ref.y[None, :]
        fv = problem.f(X, Y, np.repeat(side[:, None], ref.size, axis=1))
        loads = (fv * ref.w[None, :]) @ L.T * h * h
        np.add.at(F, nodes, loads)
        np.add.at(mean, nodes, np.broadcast_to(reference_integrals(p) * h * h, nodes.shape))

    # cut cells and enrichment supports: quadrature on both sides
    for c in special:
        r = rules(c)
        if r.size == 0:
            continue
        dofs, v, gx, gy = cell_basis(mesh, space, n_fem, c, r.x, r.y, r.side)
        kw = problem.kappa(r.side) * r.w
        Ke = (gx * kw) @ gx.T + (gy * kw) @ gy.T
        if not np.all(np.isfinite(Ke)):
            raise FloatingPointError(f"non-finite element matrix in cell {int(c)}")
        m = len(dofs)
        rows.append(np.repeat(dofs, m))
        cols.append(np.tile(dofs, m))
        vals.append(Ke.ravel())
        F[dofs] += v @ (problem.f(r.x, r.y, r.side) * r.w)
        mean[dofs] += v @ r.w

    special_set = set(special.tolist())
    nline = quad.line(p)
    # Neumann boundary
    for c, p0, p1, nrm in mesh.boundary_edges():
        x, y, w, s = boundary_rule(geom, p0, p1, nline)
        gv = problem.g(x, y, nrm[0], nrm[1], s)
        if not np.any(gv):
            continue
        if c in special_set:
            dofs, v, _, _ = cell_basis(mesh, space, n_fem, c, x, y, s)
        else:
            dofs, (v, _, _) = mesh.cell_nodes[c], fem_eval(mesh, c, x, y)
        F[dofs] += v @ (gv * w)

    # interface flux jump (always assembled, even when q vanishes)
    for c in cls.I0_el:
        r, _ = interface_rule(geom, mesh.box(c), nline)
        if r.size == 0:
            continue
        s = geom.classify(r.x, r.y)
        dofs, v, _, _ = cell_basis(mesh, space, n_fem, c, r.x, r.y, s)
        F[dofs] += v @ (problem.q(r.x, r.y) * r.w)

    if not np.all(np.isfinite(F)):
        raise FloatingPointError("non-finite load vector")
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    K = 0.5 * (K + K.T)

    gram_rules = CellRules(mesh, geom, cls, quad.gram(p))
    T, dropped, info = _basis_change(mesh, space, K, gram_rules, n_fem)
    K = (T.T @ K @ T).tocsr()
    K = 0.5 * (K + K.T)
    system = BlockLinearSystem(
        K=K.tocsr(),
        F=T.T @ F,
        mean=T.T @ mean,
        n_fem=n_fem,
        n_enr=T.shape[1] - n_fem,
        T=T.tocsr(),
        n_raw_enr=n_raw,
        dropped=dropped,
        info=info,
    )
    system.info.update(quad=quad.as_dict(p), special_cells=int(len(special)))
    return system


def group_samples(space, rules, g):
    """Values of group ``g``'s raw functions at the quadrature points of its
    support, with matching weights (for L2 inner products on the support)."""
    vals, ws = [], []
    for c in space.groups[g].support:
        r = rules(c)
        if r.size == 0:
            continue
        _, v, _, _ = space.evaluate(c, r.x, r.y, r.side, groups=[g])
        vals.append(v)
        ws.append(r.w)
    if not vals:
        return np.zeros((space.groups[g].size, 0)), np.zeros(0)
    return np.hstack(vals), np.concatenate(ws)


def _basis_change(mesh, space, K, rules, n_fem):
    """Block-diagonal map from final to raw coefficients."""
    diag = K.diagonal()
    scale = diag.max() if diag.size else 1.0
    scheme = space.scheme
    use_gs = scheme.gram_schmidt(space.p)
    use_lpca = scheme.name == "sgfem" and scheme.lpca_xi is not None
    tr, tc, tv = [np.arange(n_fem)], [np.arange(n_fem)], [np.ones(n_fem)]
    col = n_fem
    dropped = 0
    zero = 0
    kept_per_group = []
    K = K.tocsr()
    for gi, g in enumerate(space.groups):
        idx = n_fem + g.dofs
        alive = diag[idx] > ZERO_FUNCTION_TOL * scale
        zero += int((~alive).sum())
        C = np.eye(g.size)[:, alive]
        if use_gs and C.shape[1]:
            vals, w = group_samples(space, rules, gi)
            coef, nd = gram_schmidt_local(vals[alive], w)
            C = C @ coef
            dropped += nd
        if use_lpca and C.shape[1]:
            Kg = K[idx][:, idx].toarray()
            V = lpca_condense(C.T @ Kg @ C, scheme.lpca_xi)
            dropped += C.shape[1] - V.shape[1]
            C = C @ V
        kept_per_group.append(C.shape[1])
        r, c = np.nonzero(C)
        tr.append(idx[r])
        tc.append(col + c)
        tv.append(C[r, c])
        col += C.shape[1]
    T = sp.csr_matrix(
        (np.concatenate(tv), (np.concatenate(tr), np.concatenate(tc))),
        shape=(n_fem + space.n_raw, col),
    )
    info = {"zero_functions": zero, "kept_per_group": kept_per_group,
            "gram_schmidt": use_gs, "lpca": use_lpca}
    return T, dropped + zero, info
