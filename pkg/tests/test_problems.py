from __future__ import annotations

import numpy as np
import pytest

from gfem2d.problems import (
    circle_problem, line_problem, make_problem, patch_problem, robustness_config, robustness_delta,
)

PROBLEMS = [line_problem(), circle_problem(), line_problem(1.0, 3.0)]
IDS = ["line", "circle", "line-k3"]


def _interface_points(geom, n=200):
    rng = np.random.default_rng(5)
    pts = np.array([geom.closest_point(*p) for p in rng.random((n, 2)) * 0.8 + 0.1])
    return pts[:, 0], pts[:, 1]


@pytest.mark.parametrize("prob", PROBLEMS, ids=IDS)
def test_continuity_across_interface(prob):
    x, y = _interface_points(prob.geom)
    z, o = np.zeros(len(x), int), np.ones(len(x), int)
    u0, u1 = prob.u_raw(x, y, z), prob.u_raw(x, y, o)
    assert np.abs(u0 - u1).max() <= 1e-12 * max(1.0, np.abs(u0).max())


@pytest.mark.parametrize("prob", PROBLEMS, ids=IDS)
def test_flux_jump_matches_q(prob):
    # one-sided difference quotients along the normal out of Omega0
    x, y = _interface_points(prob.geom)
    nx, ny = prob.geom.level_grad(x, y)
    nrm = np.hypot(nx, ny)
    nx, ny = nx / nrm, ny / nrm
    z, o = np.zeros(len(x), int), np.ones(len(x), int)
    h = 1e-5

    def dn(side, sign):
        # derivative along n from points inside the given side
        a = prob.u_raw(x + sign * 2 * h * nx, y + sign * 2 * h * ny, side)
        b = prob.u_raw(x + sign * h * nx, y + sign * h * ny, side)
        c = prob.u_raw(x, y, side)
        return sign * (-a + 4 * b - 3 * c) / (2 * h)

    jump = prob.kappa0 * dn(z, -1) - prob.kappa1 * dn(o, 1)
    scale = max(1.0, np.abs(prob.kappa1 * dn(o, 1)).max())
    assert np.abs(prob.q(x, y) - jump).max() <= 1e-6 * scale


def test_circle_flux_is_continuous():
    prob = circle_problem()
    x, y = _interface_points(prob.geom)
    assert np.abs(prob.q(x, y)).max() <= 1e-10 * prob.kappa1 / prob.geom.radius**2


@pytest.mark.parametrize("prob", PROBLEMS, ids=IDS)
@pytest.mark.parametrize("side", [0, 1])
def test_gradient_matches_differences(prob, side):
    rng = np.random.default_rng(side)
    x, y = rng.random((2, 40)) * 0.9 + 0.05
    s = np.full(40, side)
    h = 1e-6
    gx, gy = prob.grad(x, y, s)
    fx = (prob.u_raw(x + h, y, s) - prob.u_raw(x - h, y, s)) / (2 * h)
    fy = (prob.u_raw(x, y + h, s) - prob.u_raw(x, y - h, s)) / (2 * h)
    scale = max(1.0, np.abs(gx).max(), np.abs(gy).max())
    assert np.abs(fx - gx).max() <= 1e-6 * scale
    assert np.abs(fy - gy).max() <= 1e-6 * scale


@pytest.mark.parametrize("prob", PROBLEMS, ids=IDS)
@pytest.mark.parametrize("side", [0, 1])
def test_pde_residual(prob, side):
    rng = np.random.default_rng(10 + side)
    x, y = rng.random((2, 400)) * 0.8 + 0.1
    keep = (prob.geom.classify(x, y) == side) & (prob.geom.distance(x, y) > 0.02)
    x, y = x[keep][:40], y[keep][:40]
    s = np.full(len(x), side)
    h = 1e-4
    kap = prob.kappa(s)
    div = (prob.grad(x + h, y, s)[0] - prob.grad(x - h, y, s)[0]
           + prob.grad(x, y + h, s)[1] - prob.grad(x, y - h, s)[1]) / (2 * h)
    res = -kap * div - prob.f(x, y, s)
    gx, gy = prob.grad(x, y, s)
    scale = max(1.0, np.abs(kap * np.hypot(gx, gy)).max())
    assert np.abs(res).max() <= 1e-5 * scale


@pytest.mark.parametrize("prob", PROBLEMS + [patch_problem()], ids=IDS + ["patch"])
def test_exact_solution_has_zero_mean(prob):
    from gfem2d.quadrature import cell_rule

    total = 0.0
    n = 12
    for j in range(n):
        for i in range(n):
            for r in cell_rule(prob.geom, (i / n, (i + 1) / n, j / n, (j + 1) / n), 12):
                if r.size:
                    total += float(r.w @ prob.u(r.x, r.y, np.full(r.size, r.side)))
    assert abs(total) <= 1e-10


def test_robustness_configuration():
    assert robustness_delta(1) == pytest.approx(0.015)
    assert robustness_delta(15) == pytest.approx(0.03 / 2**15)
    cfg = robustness_config(robustness_delta(4))
    assert cfg.geom.delta == pytest.approx(0.03 / 16)
    assert not cfg.exact
    assert np.all(cfg.f(np.array([0.2]), np.array([0.3])) == 0)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        line_problem(0.0, 1.0)
    with pytest.raises(ValueError):
        robustness_config(0.7)
    with pytest.raises(ValueError):
        make_problem("square", 1, 1)
