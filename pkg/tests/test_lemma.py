from __future__ import annotations

import math

import numpy as np
import pytest

from gfem2d.geometry import Circle, Line
from gfem2d.lemma import (
    circle_case, eta_coefficients, flat_case, frame, residual_check, residuals, signed_distance,
    taylor_table, verify,
)


def _line_point():
    g = Line()
    return g, np.array(g.closest_point(0.4, 0.5))


def test_frame_normal_points_into_omega0():
    g = Circle()
    pt = np.array([g.center[0] + g.radius, g.center[1]])
    n, t = frame(g, pt)
    assert np.allclose(n, [-1.0, 0.0])
    assert np.allclose(t, [0.0, -1.0])
    assert signed_distance(g)(*g.center) == pytest.approx(g.radius)


def test_normal_coordinate_table():
    g, pt = _line_point()
    n, _ = frame(g, pt)
    tab = taylor_table(g, lambda x, y: (x - pt[0]) * n[0] + (y - pt[1]) * n[1], pt, 3)
    expect = np.zeros_like(tab.u)
    expect[1, 0] = 1.0
    assert np.abs(tab.u - expect).max() <= 1e-8


def test_line_distance_is_normal_coordinate():
    g, pt = _line_point()
    tab = taylor_table(g, lambda x, y: 0 * x, pt, 4)
    assert tab.d[1, 0] == pytest.approx(1.0, abs=1e-12)
    rest = tab.d.copy()
    rest[1, 0] = 0.0
    a, b = np.indices(rest.shape)
    # the difference quotients are only accurate to 1e-8 up to order 4
    assert np.abs(rest[a + b <= 4]).max() <= 1e-8


def test_circle_distance_expansion():
    g = Circle()
    r0 = g.radius
    pt = np.array([g.center[0] + r0 * math.cos(1.1), g.center[1] + r0 * math.sin(1.1)])
    d = taylor_table(g, lambda x, y: 0 * x, pt, 3).d
    # r0 - sqrt((r0 - s)^2 + t^2) in the (s, t) frame
    assert d[1, 0] == pytest.approx(1.0, abs=1e-8)
    assert d[2, 0] == pytest.approx(0.0, abs=1e-4)
    assert d[0, 2] == pytest.approx(-1 / (2 * r0), abs=1e-4)
    assert d[1, 2] == pytest.approx(-1 / (2 * r0**2), abs=1e-4)
    assert d[0, 4] == pytest.approx(1 / (8 * r0**3), abs=1e-4)


def _table(order, rng):
    """Synthetic table: random u, flat-like d with a unit pivot."""
    u = rng.standard_normal((order + 1, order + 1))
    d = rng.standard_normal((order + 1, order + 1))
    u[0, :] = 0.0
    d[0, :] = 0.0
    d[1, 0] = 1.0
    from gfem2d.lemma import TaylorTable

    z = np.zeros_like(u)
    return TaylorTable(np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), order, u, d, z, z, 0.0)


def test_recursion_first_levels():
    tab = _table(4, np.random.default_rng(0))
    u, d = tab.u, tab.d
    c = eta_coefficients(tab, 3)
    assert c[0, 0] == u[1, 0]
    assert c[1, 0] == pytest.approx(u[2, 0] - d[2, 0] * c[0, 0])
    assert c[0, 1] == pytest.approx(u[1, 1] - d[1, 1] * c[0, 0])
    assert c[2, 0] == pytest.approx(u[3, 0] - d[3, 0] * c[0, 0] - d[2, 0] * c[1, 0])
    assert np.count_nonzero(~np.isnan(residuals(tab, c, 3))) == 10


@pytest.mark.parametrize("p", range(1, 6))
def test_recursion_kills_residuals(p):
    tab = _table(p + 1, np.random.default_rng(p))
    c = eta_coefficients(tab, p)
    eps = residuals(tab, c, p)
    # the structural zeros and every level determined by the recursion
    assert np.nanmax(np.abs(eps)) <= 1e-12 * max(1.0, np.abs(tab.u).max() * np.abs(tab.d).max() ** p)
    assert np.all(eps[0, : p + 1] == 0.0)


def test_u_equal_d_gives_unit_eta():
    g = Circle()
    pt = np.array([g.center[0], g.center[1] + g.radius])
    tab = taylor_table(g, signed_distance(g), pt, 3)
    c = eta_coefficients(tab, 3)
    assert c[0, 0] == pytest.approx(1.0, abs=1e-10)
    mask = np.ones_like(c, bool)
    mask[0, 0] = False
    assert np.abs(c[mask]).max() <= 1e-6


@pytest.mark.parametrize("p", range(1, 5))
def test_flat_case_residual(p):
    geom, cases = flat_case()
    for pt, func in cases:
        tab = taylor_table(geom, func, pt, p)
        assert residual_check(tab, eta_coefficients(tab, p), p) <= 1e-8


@pytest.mark.parametrize("p", range(1, 5))
def test_circle_case_residual(p):
    geom, cases = circle_case()
    for pt, func in cases:
        tab = taylor_table(geom, func, pt, p)
        assert residual_check(tab, eta_coefficients(tab, p), p) <= 1e-4


def test_uniqueness_under_perturbation():
    geom, cases = circle_case()
    pt, func = cases[0]
    p = 3
    tab = taylor_table(geom, func, pt, p)
    c = eta_coefficients(tab, p)
    for m in range(p):
        for n in range(p - m):
            cp = c.copy()
            cp[m, n] += 1e-3
            eps = residuals(tab, cp, p)
            assert abs(eps[m + 1, n]) >= 5e-4


def test_frame_flip_leaves_residual_unchanged():
    geom, cases = circle_case()
    pt, func = cases[1]
    tab = taylor_table(geom, func, pt, 3)
    r1 = residual_check(tab, eta_coefficients(tab, 3), 3)
    flip = tab.flipped()
    r2 = residual_check(flip, eta_coefficients(flip, 3), 3)
    assert abs(r1 - r2) <= 1e-6


def test_verify_rows():
    rows = verify("line", 3)
    assert len(rows) == 3
    assert all(r.residual <= 1e-8 for r in rows)
    with pytest.raises(ValueError):
        verify("ellipse", 2)


def test_table_order_guard():
    g, pt = _line_point()
    tab = taylor_table(g, lambda x, y: 0 * x, pt, 2)
    with pytest.raises(ValueError):
        eta_coefficients(tab, 3)
