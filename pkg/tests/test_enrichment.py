from __future__ import annotations

import numpy as np
import pytest

from gfem2d.assembly import CellRules, QuadConfig, group_samples
from gfem2d.enrichment import (
    SCHEMES, Scheme, build_enrichment_space, build_pu, build_ramp, gram_schmidt_local,
    lpca_condense, monomial_powers,
)
from gfem2d.geometry import Circle, HLine, Line
from gfem2d.mesh import build_mesh, classify_cells
from gfem2d.selftest import pu_error


def _space(scheme, p, N, geom, **kw):
    mesh = build_mesh(N, p)
    cls = classify_cells(mesh, geom)
    return build_enrichment_space(mesh, cls, geom, Scheme(scheme, **kw))


def test_monomial_powers():
    assert monomial_powers(1) == [(0, 0)]
    assert monomial_powers(3) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(monomial_powers(2, inclusive=True)) == 6
    for p in range(1, 6):
        assert len(monomial_powers(p)) == p * (p + 1) // 2


def test_scheme_validation():
    with pytest.raises(ValueError):
        Scheme("xfem")
    with pytest.raises(ValueError):
        Scheme("sgfem", lpca_xi=1.5)
    with pytest.raises(ValueError):
        Scheme("hosgfem", orthogonalize="sometimes")
    assert Scheme("hosgfem", orthogonalize="auto").gram_schmidt(5)
    assert not Scheme("hosgfem", orthogonalize="auto").gram_schmidt(4)
    assert Scheme("hosgfem").gram_schmidt(2)
    assert not Scheme("gfem", orthogonalize="on").gram_schmidt(3)


def test_p_out_of_range_rejected():
    mesh = build_mesh(4, 5)
    cls = classify_cells(mesh, Line())
    with pytest.raises(ValueError):
        build_enrichment_space(mesh, cls, Line(), Scheme("hosgfem"), p=6)


@pytest.mark.parametrize("geom", [Line(), Circle()], ids=["line", "circle"])
def test_dof_counts(geom):
    mesh = build_mesh(10, 3)
    cls = classify_cells(mesh, geom)
    m = len(cls.I0_el)
    counts = {s: build_enrichment_space(mesh, cls, geom, Scheme(s)).n_raw for s in SCHEMES}
    assert counts["fem"] == 0
    assert counts["hosgfem"] == 6 * m
    assert counts["gfem"] == counts["sgfem"] == 6 * len(cls.I0_v)
    assert counts["cgfem"] == 10 * len(cls.I1_v)


def test_descriptors_record_scheme_details():
    sp = _space("hosgfem", 3, 8, Circle())
    d = sp.descriptors
    assert len(d) == sp.n_raw
    first = d[0]
    assert first.one_sided and first.subtract_interpolant
    assert first.shift == tuple(sp.mesh.centroids[first.carrier])
    assert {x.block for x in d} == set(range(len(sp.groups)))
    two = _space("hosgfem", 3, 8, Circle(), one_sided=False)
    assert not two.descriptors[0].one_sided


def test_pu_vertex_and_edge_coefficients():
    # HLine through one row: each cut cell shares left/right edges with cut cells
    mesh = build_mesh(6, 3)
    cls = classify_cells(mesh, HLine(0.03))
    pus = {pu.cell: pu for pu in build_pu(mesh, cls)}
    mid = pus[int(mesh.locate(0.45, 0.53))]
    c = mid.coeffs  # c[j, i]
    assert np.all(c[1:-1, 1:-1] == 1.0)
    assert np.all(c[1:-1, 0] == 0.5) and np.all(c[1:-1, -1] == 0.5)
    assert np.all(c[0, 1:-1] == 1.0)  # bottom edge: neighbour below is not cut
    assert c[0, 0] == 0.5  # vertex shared by two cut cells


def test_pu_vertex_shared_by_three_cut_cells():
    # a circle arc crossing a vertex neighbourhood diagonally
    mesh = build_mesh(10, 2)
    geom = Circle()
    cls = classify_cells(mesh, geom)
    counts = {}
    for c in cls.I0_el:
        for v in mesh.cell_vertices[c]:
            counts[int(v)] = counts.get(int(v), 0) + 1
    v3 = [v for v, n in counts.items() if n == 3]
    assert v3, "expected a vertex with three cut neighbours"
    node = int(mesh.vertex_node(v3[0]))
    for pu in build_pu(mesh, cls):
        loc = list(mesh.cell_nodes[pu.cell])
        if node in loc:
            assert pu.coeffs.ravel()[loc.index(node)] == pytest.approx(1 / 3)


def test_isolated_cut_cell_pu_is_one():
    mesh = build_mesh(5, 2)
    geom = Circle(center=(0.5, 0.5), radius=0.05)
    cls = classify_cells(mesh, geom)
    assert len(cls.I0_el) == 1
    (pu,) = build_pu(mesh, cls)
    assert np.all(pu.coeffs == 1.0)


@pytest.mark.parametrize("p", range(1, 6))
@pytest.mark.parametrize("geom", [Line(), Circle()], ids=["line", "circle"])
def test_partition_of_unity(geom, p):
    assert pu_error(geom, 10, p) <= 1e-12


def test_pu_is_continuous_across_cells():
    sp = _space("hosgfem", 3, 10, Circle())
    mesh = sp.mesh
    for g in sp.groups[:6]:
        for a in g.support:
            for b in g.support:
                ax0, ax1, ay0, ay1 = mesh.box(a)
                bx0, bx1, by0, by1 = mesh.box(b)
                if abs(ax1 - bx0) < 1e-12 and abs(ay0 - by0) < 1e-12:
                    y = np.linspace(ay0, ay1, 7)
                    x = np.full(7, ax1)
                    va = sp.evaluate(a, x, y, groups=[sp.groups.index(g)])[1]
                    vb = sp.evaluate(b, x, y, groups=[sp.groups.index(g)])[1]
                    assert np.allclose(va, vb, atol=1e-12)


@pytest.mark.parametrize("scheme", ["hosgfem", "sgfem"])
@pytest.mark.parametrize("geom", [Line(), Circle()], ids=["line", "circle"])
def test_node_vanishing(scheme, geom):
    sp = _space(scheme, 3, 10, geom)
    mesh = sp.mesh
    worst = 0.0
    for c in sp.support_cells:
        xy = mesh.node_coords[mesh.cell_nodes[c]]
        side = geom.classify(xy[:, 0], xy[:, 1])
        _, v, _, _ = sp.evaluate(c, xy[:, 0], xy[:, 1], side)
        worst = max(worst, float(np.abs(v).max(initial=0.0)))
    assert worst <= 1e-12


def test_support_locality():
    sp = _space("hosgfem", 2, 10, Line())
    mesh = sp.mesh
    g = sp.groups[0]
    outside = [c for c in range(mesh.n_cells) if c not in g.support]
    assert set(g.support) == set(mesh.neighbors8(g.carrier)) & set(g.pu.local)
    for c in outside[:20]:
        assert 0 not in sp.cell_groups.get(c, [])


def test_sgfem_vanishes_for_interpolated_distance():
    # d is piecewise linear on each half and exactly interpolated at p = 1
    sp = _space("sgfem", 1, 8, HLine(0.0))
    for c in sp.support_cells:
        pts = np.random.default_rng(int(c)).random((9, 2))
        x0, _, y0, _ = sp.mesh.box(c)
        x, y = x0 + pts[:, 0] * sp.mesh.h, y0 + pts[:, 1] * sp.mesh.h
        _, v, _, _ = sp.evaluate(c, x, y)
        assert np.abs(v).max() <= 1e-14


def test_ramp_function():
    mesh = build_mesh(10, 1)
    cls = classify_cells(mesh, Line())
    R = build_ramp(mesh, cls)
    cut = int(cls.I0_el[0])
    vx, vy = mesh.vertex_coords[mesh.cell_vertices[cut]].T
    assert np.allclose(R(vx, vy), 1.0)
    far = [c for c in range(mesh.n_cells) if c not in set(cls.I1_el)]
    cx, cy = mesh.centroids[far].T
    assert np.allclose(R(cx, cy), 0.0)
    with pytest.raises(ValueError):
        build_ramp(mesh, cls, p=2)


def test_cgfem_ramp_distance_is_continuous():
    sp = _space("cgfem", 1, 10, Circle())
    mesh = sp.mesh
    for c in sp.support_cells[:30]:
        x0, x1, y0, y1 = mesh.box(c)
        right = int(c) + 1
        if right % mesh.n == 0 or right not in sp.cell_groups:
            continue
        y = np.array([0.5 * (y0 + y1)])
        x = np.array([x1])
        ia, va, _, _ = sp.evaluate(c, x, y)
        ib, vb, _, _ = sp.evaluate(right, x, y)
        shared = np.intersect1d(ia, ib)
        for k in shared:
            assert va[list(ia).index(k)] == pytest.approx(vb[list(ib).index(k)], abs=1e-13)


# -- Gram-Schmidt ----------------------------------------------------------------

def test_gs_keeps_orthonormal_input():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((40, 3)))
    w = np.full(40, 1.0)
    coef, dropped = gram_schmidt_local(Q.T, w)
    assert dropped == 0
    assert np.allclose(np.abs(coef), np.eye(3), atol=1e-12)


def test_gs_drops_dependent_function():
    x = np.linspace(-1, 1, 50)
    f, g = x, np.ones_like(x)
    coef, dropped = gram_schmidt_local(np.stack([f, 2 * f, g]), np.full(50, 0.04))
    assert dropped == 1 and coef.shape == (3, 2)


@pytest.mark.parametrize("geom", [Line(), Circle()], ids=["line", "circle"])
def test_gs_orthonormal_by_independent_quadrature(geom):
    sp = _space("hosgfem", 5, 10, geom)
    coarse = CellRules(sp.mesh, geom, sp.classification, QuadConfig().gram(5))
    fine = CellRules(sp.mesh, geom, sp.classification, 30)
    for gi in range(0, len(sp.groups), 3):
        vals, w = group_samples(sp, coarse, gi)
        coef, _ = gram_schmidt_local(vals, w)
        fv, fw = group_samples(sp, fine, gi)
        out = coef.T @ fv
        G = (out * fw) @ out.T
        assert np.abs(G - np.eye(G.shape[0])).max() <= 1e-8
        # span preservation
        rec, *_ = np.linalg.lstsq((out * np.sqrt(fw)).T, (fv * np.sqrt(fw)).T, rcond=None)
        resid = (fv - rec.T @ out) * np.sqrt(fw)
        norms = np.linalg.norm(fv * np.sqrt(fw), axis=1)
        assert np.all(np.linalg.norm(resid, axis=1) <= 1e-8 * norms)


# -- LPCA ------------------------------------------------------------------------

def test_lpca_threshold_examples():
    V = lpca_condense(np.diag([1.0, 1e-20, 1.0]), 1e-15)
    assert V.shape == (3, 2)
    assert np.allclose(np.abs(V[1]), 0.0)
    assert lpca_condense(np.eye(3), 1e-15).shape == (3, 3)
    assert lpca_condense(np.diag([1.0, 1e-20, 1.0]), 0.0).shape == (3, 3)
    assert lpca_condense(np.zeros((2, 2)), 1e-15).shape == (2, 0)


def test_lpca_descending_order():
    A = np.diag([1.0, 5.0, 3.0])
    V = lpca_condense(A, 1e-15)
    lam = np.diag(V.T @ A @ V)
    assert np.all(np.diff(lam) <= 0)
