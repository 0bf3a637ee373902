"""Uniform N x N quadrilateral meshes of the unit square and the index sets
that drive the enrichment schemes."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class QuadMesh:
    """Cells are numbered row-major (``cid = cy * N + cx``).  FE nodes live on
    the ``(pN+1) x (pN+1)`` grid of multiples of ``h/p`` and are numbered
    lexicographically with x running fastest; mesh vertices are the subset of
    FE nodes with grid indices divisible by ``p``."""

    n: int
    p: int

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    @property
    def n_vertices(self) -> int:
        return (self.n + 1) ** 2

    @property
    def nodes_per_side(self) -> int:
        return self.p * self.n + 1

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_side**2

    @cached_property
    def node_coords(self) -> np.ndarray:
        m = self.nodes_per_side
        g = np.arange(m) / (self.p * self.n)
        xx, yy = np.meshgrid(g, g, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def vertex_coords(self) -> np.ndarray:
        g = np.arange(self.n + 1) / self.n
        xx, yy = np.meshgrid(g, g, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cell_index(self, cid):
        return np.asarray(cid) % self.n, np.asarray(cid) // self.n

    def box(self, cid):
        cx, cy = divmod(int(cid), self.n)[::-1]
        h = self.h
        return (cx * h, (cx + 1) * h, cy * h, (cy + 1) * h)

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """(n_cells, (p+1)^2) global FE node ids; local order (i, j) -> i + j (p+1)."""
        p, m = self.p, self.nodes_per_side
        cx, cy = self.cell_index(np.arange(self.n_cells))
        i = np.arange(p + 1)
        li, lj = np.meshgrid(i, i, indexing="xy")
        li, lj = li.ravel(), lj.ravel()
        gi = p * cx[:, None] + li[None, :]
        gj = p * cy[:, None] + lj[None, :]
        return gj * m + gi

    @cached_property
    def cell_vertices(self) -> np.ndarray:
        """(n_cells, 4) vertex ids in order (0,0), (1,0), (0,1), (1,1)."""
        n1 = self.n + 1
        cx, cy = self.cell_index(np.arange(self.n_cells))
        base = cy * n1 + cx
        return np.column_stack([base, base + 1, base + n1, base + n1 + 1])

    @cached_property
    def centroids(self) -> np.ndarray:
        cx, cy = self.cell_index(np.arange(self.n_cells))
        return np.column_stack([(cx + 0.5) * self.h, (cy + 0.5) * self.h])

    @cached_property
    def cell_origin(self) -> np.ndarray:
        cx, cy = self.cell_index(np.arange(self.n_cells))
        return np.column_stack([cx * self.h, cy * self.h])

    def vertex_node(self, vid):
        """FE node id of a mesh vertex."""
        n1 = self.n + 1
        vi, vj = np.asarray(vid) % n1, np.asarray(vid) // n1
        return (self.p * vj) * self.nodes_per_side + self.p * vi

    def vertex_cells(self, vid) -> list[int]:
        n1 = self.n + 1
        vi, vj = int(vid) % n1, int(vid) // n1
        out = []
        for cy in (vj - 1, vj):
            for cx in (vi - 1, vi):
                if 0 <= cx < self.n and 0 <= cy < self.n:
                    out.append(cy * self.n + cx)
        return out

    def neighbors8(self, cid) -> list[int]:
        cx, cy = int(cid) % self.n, int(cid) // self.n
        out = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                x, y = cx + dx, cy + dy
                if 0 <= x < self.n and 0 <= y < self.n:
                    out.append(y * self.n + x)
        return out

    def locate(self, x, y):
        """Cell id containing each point (points on shared edges go to the
        upper/right cell, clipped at the domain boundary)."""
        cx = np.clip(np.floor(np.asarray(x) * self.n).astype(int), 0, self.n - 1)
        cy = np.clip(np.floor(np.asarray(y) * self.n).astype(int), 0, self.n - 1)
        return cy * self.n + cx

    def boundary_edges(self):
        """(cell id, p0, p1, outward normal) for every boundary edge."""
        h, n = self.h, self.n
        out = []
        for cx in range(n):
            out.append((cx, (cx * h, 0.0), ((cx + 1) * h, 0.0), (0.0, -1.0)))
            out.append(((n - 1) * n + cx, (cx * h, 1.0), ((cx + 1) * h, 1.0), (0.0, 1.0)))
        for cy in range(n):
            out.append((cy * n, (0.0, cy * h), (0.0, (cy + 1) * h), (-1.0, 0.0)))
            out.append((cy * n + n - 1, (1.0, cy * h), (1.0, (cy + 1) * h), (1.0, 0.0)))
        return out


def build_mesh(n: int, p: int) -> QuadMesh:
    if int(n) != n or n < 2:
        raise ValueError("N must be an integer >= 2")
    if not 1 <= p <= 5:
        raise ValueError("p must be in 1..5")
    return QuadMesh(int(n), int(p))


@dataclass(frozen=True)
class CellClassification:
    I_el: np.ndarray
    I0_el: np.ndarray  # cut cells
    I1_el: np.ndarray  # cut cells and their vertex neighbours
    I0_n: np.ndarray
    I1_n: np.ndarray
    I0_v: np.ndarray
    I1_v: np.ndarray

    @cached_property
    def cut_set(self) -> frozenset:
        return frozenset(int(c) for c in self.I0_el)


def classify_cells(mesh: QuadMesh, geom) -> CellClassification:
    # the level is a signed distance, so only cells near the curve can be cut
    near = np.flatnonzero(np.abs(geom.level(*mesh.centroids.T)) <= 0.75 * mesh.h)
    cut = np.array([c for c in near if geom.is_cut(mesh.box(c))], dtype=int)
    ring = set()
    for c in cut:
        ring.update(mesh.neighbors8(c))
    I1 = np.array(sorted(ring), dtype=int)
    return CellClassification(
        I_el=np.arange(mesh.n_cells),
        I0_el=cut,
        I1_el=I1,
        I0_n=np.unique(mesh.cell_nodes[cut]) if len(cut) else np.zeros(0, int),
        I1_n=np.unique(mesh.cell_nodes[I1]) if len(I1) else np.zeros(0, int),
        I0_v=np.unique(mesh.cell_vertices[cut]) if len(cut) else np.zeros(0, int),
        I1_v=np.unique(mesh.cell_vertices[I1]) if len(I1) else np.zeros(0, int),
    )
