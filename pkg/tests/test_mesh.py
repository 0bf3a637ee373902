from __future__ import annotations

import numpy as np
import pytest

from gfem2d.geometry import Circle, HLine, Line
from gfem2d.mesh import build_mesh, classify_cells


@pytest.mark.parametrize("n,p", [(2, 1), (5, 3), (7, 5)])
def test_counts_and_node_layout(n, p):
    m = build_mesh(n, p)
    assert m.n_cells == n * n
    assert m.n_nodes == (p * n + 1) ** 2
    assert m.cell_nodes.shape == (n * n, (p + 1) ** 2)
    # every node belongs to some cell, and shared nodes have identical coordinates
    assert np.array_equal(np.unique(m.cell_nodes), np.arange(m.n_nodes))
    xy = m.node_coords[m.cell_nodes]
    org = m.cell_origin[:, None, :]
    assert np.all(xy >= org - 1e-15) and np.all(xy <= org + m.h + 1e-15)


def test_vertices_are_corner_nodes():
    m = build_mesh(4, 3)
    corners = m.cell_nodes[:, [0, 3, 12, 15]]
    assert np.array_equal(m.vertex_node(m.cell_vertices), corners)
    assert np.allclose(m.node_coords[m.vertex_node(np.arange(m.n_vertices))], m.vertex_coords)


def test_neighbours_and_vertex_cells():
    m = build_mesh(4, 1)
    assert sorted(m.neighbors8(0)) == [0, 1, 4, 5]
    assert len(m.neighbors8(5)) == 9
    assert m.vertex_cells(0) == [0]
    assert sorted(m.vertex_cells(6)) == [0, 1, 4, 5]


def test_locate_prefers_upper_right_cell():
    m = build_mesh(4, 2)
    assert m.locate(0.25, 0.25) == 5
    assert m.locate(1.0, 1.0) == 15
    assert m.locate(0.0, 0.0) == 0


def test_boundary_edges_cover_perimeter():
    m = build_mesh(5, 2)
    edges = m.boundary_edges()
    assert len(edges) == 20
    total = sum(np.hypot(p1[0] - p0[0], p1[1] - p0[1]) for _, p0, p1, _ in edges)
    assert total == pytest.approx(4.0)


def test_invalid_mesh_rejected():
    with pytest.raises(ValueError):
        build_mesh(1, 1)
    with pytest.raises(ValueError):
        build_mesh(4, 6)


@pytest.mark.parametrize("geom", [Line(), Circle(), HLine(0.03 / 2**6)], ids=["line", "circle", "hline"])
def test_index_sets(geom):
    m = build_mesh(10, 2)
    cls = classify_cells(m, geom)
    cut = cls.I0_el
    assert len(cut) > 0
    for c in range(m.n_cells):
        assert (c in cls.cut_set) == geom.is_cut(m.box(c))
    assert set(cut) <= set(cls.I1_el)
    for c in cut:
        assert set(m.neighbors8(c)) <= set(cls.I1_el)
    assert set(np.unique(m.cell_nodes[cut])) == set(cls.I0_n)
    assert set(cls.I0_v) <= set(cls.I1_v)
    assert set(m.vertex_node(cls.I0_v)) <= set(cls.I0_n)


def test_hline_on_grid_line_flags_both_rows_but_integrates_once():
    from gfem2d.quadrature import interface_rule

    m = build_mesh(10, 1)
    g = HLine(0.0)
    cls = classify_cells(m, g)
    assert sorted({int(c) // 10 for c in cls.I0_el}) == [4, 5]
    length = sum(interface_rule(g, m.box(c), 4)[0].w.sum() for c in cls.I0_el)
    assert length == pytest.approx(1.0, rel=1e-14)
