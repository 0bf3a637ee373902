"""Manufactured interface problems with closed-form data.

Sides are encoded as 0 (Omega0) and 1 (Omega1).  Every evaluator accepts an
optional ``side`` array; when omitted the geometry classifies the points.
Normals passed to ``g`` are outward unit normals of the unit square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import Circle, HLine, Interface, Line


def _side(geom, x, y, side):
    return geom.classify(x, y) if side is None else np.asarray(side)


@dataclass(frozen=True)
class ManufacturedProblem:
    geom: Interface
    kappa0: float
    kappa1: float
    name: str = "problem"
    delta: float | None = None
    exact: bool = True

    def __post_init__(self):
        if not (self.kappa0 > 0 and self.kappa1 > 0):
            raise ValueError("conductivities must be positive")

    def kappa(self, side):
        return np.where(np.asarray(side) == 0, self.kappa0, self.kappa1)

    # closed forms, overridden per problem
    def u_raw(self, x, y, side):
        return np.zeros(np.broadcast(x, y).shape)

    def grad(self, x, y, side=None):
        x, y = np.asarray(x, float), np.asarray(y, float)
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z.copy()

    def f(self, x, y, side=None):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def q(self, x, y):
        """Flux jump kappa0 du0/dn0 + kappa1 du1/dn1 at interface points."""
        x, y = np.asarray(x, float), np.asarray(y, float)
        n = np.broadcast(x, y).shape
        g0x, g0y = self.grad(x, y, np.zeros(n, int))
        g1x, g1y = self.grad(x, y, np.ones(n, int))
        nx, ny = self.geom.level_grad(x, y)
        nrm = np.hypot(nx, ny)
        nx, ny = nx / nrm, ny / nrm
        # n0 = (nx, ny) points out of Omega0, n1 = -n0
        return self.kappa0 * (g0x * nx + g0y * ny) - self.kappa1 * (g1x * nx + g1y * ny)

    def g(self, x, y, nx, ny, side=None):
        side = _side(self.geom, x, y, side)
        gx, gy = self.grad(x, y, side)
        return self.kappa(side) * (gx * nx + gy * ny)

    @cached_property
    def mean(self) -> float:
        """Domain average of the exact solution, by high-order quadrature."""
        if not self.exact:
            return 0.0
        from .quadrature import cell_rule

        n = 16
        total = 0.0
        for cy in range(n):
            for cx in range(n):
                box = (cx / n, (cx + 1) / n, cy / n, (cy + 1) / n)
                for r in cell_rule(self.geom, box, 14):
                    if r.size:
                        total += float(r.w @ self.u_raw(r.x, r.y, np.full(r.size, r.side)))
        return total

    def u(self, x, y, side=None):
        """Exact solution shifted to zero mean."""
        x, y = np.asarray(x, float), np.asarray(y, float)
        return self.u_raw(x, y, _side(self.geom, x, y, side)) - self.mean


@dataclass(frozen=True)
class LineProblem(ManufacturedProblem):
    """Corner-type singular part plus sin(xy); the singular point lies
    outside the unit square, so each side is smooth on the closed domain."""

    def _polar(self, x, y):
        g = self.geom
        cx, cy = 1.0 + g.beta, 1.0
        dx, dy = np.asarray(x, float) - cx, np.asarray(y, float) - cy
        r = np.hypot(dx, dy)
        # continuous branch on the square: theta in [-pi, -pi/2)
        # cy - y (not -dy) keeps +0.0 on y = 1, avoiding the atan2 branch flip
        theta = -np.arctan2(cy - np.asarray(y, float), dx)
        phi = theta + math.pi - g.theta0
        return dx, dy, r, phi

    def _a(self, side):
        return np.where(np.asarray(side) == 0, 1.0, self.kappa0 / self.kappa1)

    def u_raw(self, x, y, side):
        _, _, r, phi = self._polar(x, y)
        a = self._a(side)
        k = 4.0 / 3.0
        return r**k * (np.cos(k * phi) + a * np.sin(k * phi)) + np.sin(np.asarray(x) * np.asarray(y))

    def grad(self, x, y, side=None):
        x, y = np.asarray(x, float), np.asarray(y, float)
        side = _side(self.geom, x, y, side)
        dx, dy, r, phi = self._polar(x, y)
        a = self._a(side)
        k = 4.0 / 3.0
        F = np.cos(k * phi) + a * np.sin(k * phi)
        dF = k * (-np.sin(k * phi) + a * np.cos(k * phi))
        s = r ** (k - 2.0)
        gx = s * (k * F * dx - dF * dy)
        gy = s * (k * F * dy + dF * dx)
        c = np.cos(x * y)
        return gx + y * c, gy + x * c

    def f(self, x, y, side=None):
        x, y = np.asarray(x, float), np.asarray(y, float)
        side = _side(self.geom, x, y, side)
        return self.kappa(side) * (x**2 + y**2) * np.sin(x * y)


@dataclass(frozen=True)
class CircleProblem(ManufacturedProblem):
    """Harmonic on each side, continuous value and flux across the circle."""

    def _local(self, x, y):
        cx, cy = self.geom.center
        return np.asarray(x, float) - cx, np.asarray(y, float) - cy

    def u_raw(self, x, y, side):
        X, Y = self._local(x, y)
        r0 = self.geom.radius
        k0, k1 = self.kappa0, self.kappa1
        q2 = X**2 - Y**2
        r2 = X**2 + Y**2
        inner = 2 * k1 / r0**4 * q2
        safe = np.where(r2 > 0, r2, 1.0)
        outer = (k1 + k0) / r0**4 * q2 + (k1 - k0) * q2 / safe**2
        return np.where(np.asarray(side) == 0, inner, outer)

    def grad(self, x, y, side=None):
        x, y = np.asarray(x, float), np.asarray(y, float)
        side = _side(self.geom, x, y, side)
        X, Y = self._local(x, y)
        r0 = self.geom.radius
        k0, k1 = self.kappa0, self.kappa1
        r2 = X**2 + Y**2
        safe = np.where(r2 > 0, r2, 1.0)
        q2 = X**2 - Y**2
        ix, iy = 4 * k1 / r0**4 * X, -4 * k1 / r0**4 * Y
        c = (k1 + k0) / r0**4
        ox = 2 * c * X + (k1 - k0) * (2 * X / safe**2 - 4 * X * q2 / safe**3)
        oy = -2 * c * Y + (k1 - k0) * (-2 * Y / safe**2 - 4 * Y * q2 / safe**3)
        inside = side == 0
        return np.where(inside, ix, ox), np.where(inside, iy, oy)


@dataclass(frozen=True)
class PatchProblem(ManufacturedProblem):
    """u = x + y - 1; lies in every discrete space."""

    def u_raw(self, x, y, side):
        return np.asarray(x, float) + np.asarray(y, float) - 1.0

    def grad(self, x, y, side=None):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.ones(shape), np.ones(shape)

    @cached_property
    def mean(self) -> float:
        return 0.0


def line_problem(kappa0=1.0, kappa1=10.0, geom=None) -> LineProblem:
    return LineProblem(geom or Line(), float(kappa0), float(kappa1), "line")


def circle_problem(kappa0=1.0, kappa1=20.0, geom=None) -> CircleProblem:
    return CircleProblem(geom or Circle(), float(kappa0), float(kappa1), "circle")


def patch_problem(geom=None) -> PatchProblem:
    return PatchProblem(geom or Line(), 1.0, 1.0, "patch")


def robustness_delta(i: int) -> float:
    return 0.03 * 2.0 ** (-int(i))


def robustness_config(delta: float, kappa0=1.0, kappa1=10.0) -> ManufacturedProblem:
    """Horizontal interface y = 0.5 + delta with zero data (SCN studies only)."""
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    return ManufacturedProblem(HLine(delta), float(kappa0), float(kappa1), "hline", delta, exact=False)


def make_problem(geom: str, kappa0: float, kappa1: float, delta: float | None = None):
    if geom == "line":
        return line_problem(kappa0, kappa1)
    if geom == "circle":
        return circle_problem(kappa0, kappa1)
    if geom == "hline":
        return robustness_config(0.03 / 2 if delta is None else delta, kappa0, kappa1)
    if geom == "patch":
        return patch_problem()
    raise ValueError(f"unknown geometry {geom!r}")
