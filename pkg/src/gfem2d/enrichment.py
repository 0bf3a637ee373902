"""Enrichment spaces for the five discretisation schemes.

Every enrichment function is ``pu(x) * feature(x)`` where the feature is a
(possibly one-sided) distance times a monomial, optionally with its order-p
nodal interpolant subtracted.  Functions sharing a partition-of-unity carrier
form a *group*; post-assembly basis changes (local Gram-Schmidt, LPCA) act
group by group.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .basis import tensor_eval

SCHEMES = ("fem", "gfem", "cgfem", "sgfem", "hosgfem")
DEFAULT_LPCA_XI = 1e-15


@dataclass(frozen=True)
class Scheme:
    name: str
    lpca_xi: float | None = DEFAULT_LPCA_XI  # None: SGFEM without condensation
    # on | off | auto (auto orthogonalises only for p >= 5)
    orthogonalize: str = "on"
    one_sided: bool = True  # distance flavour used by HoSGFEM

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ValueError(f"unknown scheme {self.name!r}; expected one of {SCHEMES}")
        if self.lpca_xi is not None and not 0.0 <= self.lpca_xi < 1.0:
            raise ValueError("LPCA threshold must lie in [0, 1)")
        if self.orthogonalize not in ("auto", "on", "off"):
            raise ValueError("orthogonalize must be auto, on or off")

    def gram_schmidt(self, p: int) -> bool:
        if self.name != "hosgfem":
            return False
        if self.orthogonalize == "auto":
            return p >= 5
        return self.orthogonalize == "on"


def monomial_powers(p: int, inclusive: bool = False) -> list[tuple[int, int]]:
    """Multi-indices (i, j) with i + j < p (or <= p), ordered by total degree
    and then by descending power of x: 1, x, y, x^2, xy, y^2, ..."""
    top = p if inclusive else p - 1
    return [(l - j, j) for l in range(top + 1) for j in range(l + 1)]


@dataclass(frozen=True)
class EnrichedBasisFn:
    scheme: str
    carrier: int  # vertex id, or cut-cell id for HoSGFEM
    powers: tuple[int, int]
    one_sided: bool
    shift: tuple[float, float]
    subtract_interpolant: bool
    block: int


@dataclass(frozen=True)
class PUFunction:
    """Bernstein-based partition-of-unity function owned by one cut cell."""

    cell: int
    coeffs: np.ndarray  # (p+1, p+1), coeffs[j, i] multiplies B_i(s) B_j(t)
    support: tuple[int, ...]
    local: dict  # cell id -> flat ((p+1)^2,) coefficients in that cell's basis

    def coefficients_on(self, cell):
        return self.local.get(int(cell))


def _cut_node_counts(mesh, classification):
    counts = np.zeros(mesh.n_nodes, dtype=int)
    for c in classification.I0_el:
        counts[mesh.cell_nodes[c]] += 1
    return counts


def build_pu(mesh, classification, p=None) -> list[PUFunction]:
    """One PU function per cut cell.

    Interior Bernstein coefficients are 1, an edge coefficient is 1/2 when both
    cells along that edge are cut, a vertex coefficient is 1/n_v with n_v the
    number of cut cells around the vertex.  All three rules are the single
    statement "1 / (number of cut cells sharing this control point)", which is
    how they are computed; boundary control points continue into neighbouring
    cells so each function is C0.
    """
    if p is not None and p != mesh.p:
        raise ValueError("PU degree must match the mesh degree")
    counts = _cut_node_counts(mesh, classification)
    q = mesh.p
    out = []
    for k in classification.I0_el:
        k = int(k)
        own = mesh.cell_nodes[k]
        own_set = set(own.tolist())
        local = {}
        for c in mesh.neighbors8(k):
            nodes = mesh.cell_nodes[c]
            mask = np.array([g in own_set for g in nodes])
            if not mask.any():
                continue
            coef = np.zeros(len(nodes))
            coef[mask] = 1.0 / counts[nodes[mask]]
            local[c] = coef
        out.append(
            PUFunction(
                cell=k,
                coeffs=(1.0 / counts[own]).reshape(q + 1, q + 1),
                support=tuple(sorted(local)),
                local=local,
            )
        )
    return out


class Ramp:
    """R(x) = sum of linear hats over the vertices of cut cells."""

    def __init__(self, mesh, classification):
        self.mesh = mesh
        self.enriched = np.zeros(mesh.n_vertices, dtype=bool)
        self.enriched[classification.I0_v] = True

    def on_cell(self, cell, x, y):
        mesh = self.mesh
        org = mesh.cell_origin[cell]
        s = (np.asarray(x) - org[0]) / mesh.h
        t = (np.asarray(y) - org[1]) / mesh.h
        vals, gs, gt = tensor_eval("lagrange", 1, s, t)
        on = self.enriched[mesh.cell_vertices[cell]].astype(float)
        return on @ vals, on @ gs / mesh.h, on @ gt / mesh.h

    def __call__(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        cells = self.mesh.locate(x, y)
        out = np.empty_like(x)
        for c in np.unique(cells):
            sel = cells == c
            out[sel] = self.on_cell(c, x[sel], y[sel])[0]
        return out


def build_ramp(mesh, classification, p=1) -> Ramp:
    if p != 1:
        raise ValueError("the ramp function is built from linear hats only")
    return Ramp(mesh, classification)


@dataclass
class Group:
    carrier: int
    pu_kind: str  # hat | hat_ramp | hermite | bernstein
    support: tuple[int, ...]
    powers: list
    shift: tuple[float, float]
    one_sided: bool
    subtract: bool
    offset: int
    pu: PUFunction | None = None

    @property
    def size(self):
        return len(self.powers)

    @property
    def dofs(self):
        return np.arange(self.offset, self.offset + self.size)


@dataclass
class EnrichmentSpace:
    scheme: Scheme
    mesh: object
    geom: object
    classification: object
    groups: list = field(default_factory=list)
    ramp: Ramp | None = None

    @property
    def p(self):
        return self.mesh.p

    @property
    def n_raw(self):
        return sum(g.size for g in self.groups)

    @cached_property
    def descriptors(self) -> list[EnrichedBasisFn]:
        out = []
        for b, g in enumerate(self.groups):
            for pw in g.powers:
                out.append(
                    EnrichedBasisFn(
                        scheme=self.scheme.name,
                        carrier=g.carrier,
                        powers=pw,
                        one_sided=g.one_sided,
                        shift=g.shift,
                        subtract_interpolant=g.subtract,
                        block=b,
                    )
                )
        return out

    @cached_property
    def cell_groups(self) -> dict:
        table: dict[int, list[int]] = {}
        for gi, g in enumerate(self.groups):
            for c in g.support:
                table.setdefault(int(c), []).append(gi)
        return table

    @cached_property
    def support_cells(self) -> np.ndarray:
        return np.array(sorted(self.cell_groups), dtype=int)

    # -- evaluation ----------------------------------------------------------
    def evaluate(self, cell, x, y, side=None, groups=None):
        """Raw enrichment functions touching ``cell`` at the given points.

        Returns (dof indices into the raw enrichment numbering, values,
        d/dx, d/dy), the last three of shape (n_functions, n_points).
        """
        cell = int(cell)
        gids = self.cell_groups.get(cell, []) if groups is None else groups
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not gids:
            z = np.zeros((0, x.size))
            return np.zeros(0, int), z, z.copy(), z.copy()
        ctx = _CellContext(self, cell, x, y, side)
        idx, vals, gxs, gys = [], [], [], []
        for gi in gids:
            g = self.groups[gi]
            pv, pgx, pgy = ctx.pu(g)
            fv, fgx, fgy = ctx.features(g)
            idx.append(g.dofs)
            vals.append(pv * fv)
            gxs.append(pgx * fv + pv * fgx)
            gys.append(pgy * fv + pv * fgy)
        return np.concatenate(idx), np.vstack(vals), np.vstack(gxs), np.vstack(gys)

    def pu_values(self, cell, x, y):
        """Values of every PU carrier touching ``cell`` (for diagnostics)."""
        ctx = _CellContext(self, int(cell), np.asarray(x, float), np.asarray(y, float), None)
        return {self.groups[gi].carrier: ctx.pu(self.groups[gi])[0] for gi in self.cell_groups.get(int(cell), [])}


class _CellContext:
    """Per-cell cache of everything shared by the groups on one cell."""

    def __init__(self, space, cell, x, y, side):
        self.space = space
        self.cell = cell
        self.x = x
        self.y = y
        mesh = space.mesh
        geom = space.geom
        self.h = mesh.h
        org = mesh.cell_origin[cell]
        self.s = (x - org[0]) / mesh.h
        self.t = (y - org[1]) / mesh.h
        self.side = geom.classify(x, y) if side is None else np.asarray(side)
        self._dist = {}
        self._lag = None
        self._node_dist = {}

    # distance at the points and at the cell's FE nodes
    def distance(self, one_sided):
        if one_sided not in self._dist:
            geom = self.space.geom
            d = geom.distance_value(self.x, self.y, one_sided, self.side)
            gx, gy = geom.distance_grad(self.x, self.y, one_sided, self.side)
            self._dist[one_sided] = (d, gx, gy)
        return self._dist[one_sided]

    def node_distance(self, one_sided):
        if one_sided not in self._node_dist:
            mesh = self.space.mesh
            xy = mesh.node_coords[mesh.cell_nodes[self.cell]]
            self._node_dist[one_sided] = (
                xy,
                self.space.geom.distance_value(xy[:, 0], xy[:, 1], one_sided),
            )
        return self._node_dist[one_sided]

    def lagrange(self):
        if self._lag is None:
            v, gs, gt = tensor_eval("lagrange", self.space.p, self.s, self.t)
            self._lag = (v, gs / self.h, gt / self.h)
        return self._lag

    def pu(self, g):
        mesh = self.space.mesh
        h = self.h
        if g.pu_kind == "bernstein":
            coef = g.pu.local[self.cell]
            v, gs, gt = tensor_eval("bernstein", self.space.p, self.s, self.t)
            return coef @ v, coef @ gs / h, coef @ gt / h
        corner = int(np.flatnonzero(mesh.cell_vertices[self.cell] == g.carrier)[0])
        kind = "hermite" if g.pu_kind == "hermite" else "lagrange"
        v, gs, gt = tensor_eval(kind, 1, self.s, self.t)
        pv, pgx, pgy = v[corner], gs[corner] / h, gt[corner] / h
        if g.pu_kind == "hat_ramp":
            rv, rgx, rgy = self.space.ramp.on_cell(self.cell, self.x, self.y)
            return pv * rv, pgx * rv + pv * rgx, pgy * rv + pv * rgy
        return pv, pgx, pgy

    def features(self, g):
        d, dgx, dgy = self.distance(g.one_sided)
        sx, sy = g.shift
        X = self.x - sx
        Y = self.y - sy
        n = len(g.powers)
        vals = np.empty((n, self.x.size))
        gx = np.empty_like(vals)
        gy = np.empty_like(vals)
        for r, (i, j) in enumerate(g.powers):
            m = X**i * Y**j
            mx = i * X ** max(i - 1, 0) * Y**j if i else np.zeros_like(X)
            my = j * X**i * Y ** max(j - 1, 0) if j else np.zeros_like(Y)
            vals[r] = d * m
            gx[r] = dgx * m + d * mx
            gy[r] = dgy * m + d * my
        if g.subtract:
            xy, dn = self.node_distance(g.one_sided)
            NX = xy[:, 0] - sx
            NY = xy[:, 1] - sy
            nodal = np.stack([dn * NX**i * NY**j for i, j in g.powers])
            lv, lgx, lgy = self.lagrange()
            vals -= nodal @ lv
            gx -= nodal @ lgx
            gy -= nodal @ lgy
        return vals, gx, gy


def build_enrichment_space(mesh, classification, geom, scheme, p=None) -> EnrichmentSpace:
    """Raw (pre-orthogonalisation, pre-LPCA) enrichment space of a scheme."""
    if isinstance(scheme, str):
        scheme = Scheme(scheme)
    p = mesh.p if p is None else p
    if p != mesh.p:
        raise ValueError("scheme degree must match the mesh degree")
    if not 1 <= p <= 5:
        raise ValueError("p must be in 1..5")
    space = EnrichmentSpace(scheme, mesh, geom, classification)
    name = scheme.name
    if name == "fem":
        return space
    offset = 0
    groups = []
    if name == "hosgfem":
        powers = monomial_powers(p)
        for pu in build_pu(mesh, classification):
            cx, cy = mesh.centroids[pu.cell]
            groups.append(
                Group(pu.cell, "bernstein", pu.support, powers, (float(cx), float(cy)),
                      scheme.one_sided, True, offset, pu)
            )
            offset += len(powers)
    else:
        if name == "cgfem":
            vertices = classification.I1_v
            powers = monomial_powers(p, inclusive=True)
            space.ramp = build_ramp(mesh, classification)
            ring = set(int(c) for c in classification.I1_el)
        else:
            vertices = classification.I0_v
            powers = monomial_powers(p)
        kind = {"gfem": "hat", "cgfem": "hat_ramp", "sgfem": "hermite"}[name]
        one_sided = name == "sgfem"
        subtract = name == "sgfem"
        for v in vertices:
            support = mesh.vertex_cells(v)
            if name == "cgfem":
                support = [c for c in support if c in ring]
            groups.append(
                Group(int(v), kind, tuple(support), powers, (0.0, 0.0), one_sided, subtract, offset)
            )
            offset += len(powers)
    space.groups = groups
    return space


# -- local basis changes ---------------------------------------------------------

def gram_schmidt_local(values, weights, drop_tol=1e-12):
    """Orthonormalise functions sampled at quadrature points in weighted L2.

    ``values`` has shape (m, n_points).  Returns (coef, dropped) where
    ``coef`` has shape (m, m_kept) and column r holds the combination of the
    input functions forming output function r.  Classical Gram-Schmidt with
    one reorthogonalisation pass; a function whose remaining norm falls below
    ``drop_tol`` times the first function's norm is dropped.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    sw = np.sqrt(np.asarray(weights, dtype=float))
    A = values * sw
    m = A.shape[0]
    norms = np.linalg.norm(A, axis=1)
    ref = norms[0] if m and norms[0] > 0 else (norms.max() if m else 0.0)
    Q, C = [], []
    dropped = 0
    for l in range(m):
        v = A[l].copy()
        c = np.zeros(m)
        c[l] = 1.0
        for _ in range(2):
            for qv, qc in zip(Q, C):
                proj = qv @ v
                v -= proj * qv
                c -= proj * qc
        nrm = np.linalg.norm(v)
        if ref == 0.0 or nrm <= drop_tol * ref:
            dropped += 1
            continue
        Q.append(v / nrm)
        C.append(c / nrm)
    coef = np.column_stack(C) if C else np.zeros((m, 0))
    return coef, dropped


def lpca_condense(K_block, xi=DEFAULT_LPCA_XI):
    """Retained principal components of one vertex's enrichment stiffness block.

    Returns the (n_p, n_kept) matrix of eigenvectors whose eigenvalue share
    lambda_j / sum(lambda) is at least ``xi``, in descending eigenvalue order.
    ``xi <= 0`` keeps every component, i.e. a pure orthogonal change of basis.
    """
    K_block = np.asarray(K_block, dtype=float)
    lam, vec = np.linalg.eigh(0.5 * (K_block + K_block.T))
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    if xi <= 0:
        return vec
    total = lam.sum()
    if total <= 0:
        return np.zeros((K_block.shape[0], 0))
    share = lam / total
    return vec[:, share >= xi]
