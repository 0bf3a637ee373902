"""Implicit interface curves on the unit square.

Every interface carries a signed level function that is negative in
``Omega0`` and positive in ``Omega1``; for the curves used here the level is
the exact signed Euclidean distance, so ``distance = |level|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

TIE_TOL = 1e-14
ON_CURVE_TOL = 1e-10


class Side(IntEnum):
    OMEGA0 = 0
    OMEGA1 = 1


@dataclass(frozen=True)
class CutTopology:
    """Intersection of the interface with one axis-aligned cell."""

    cell: int
    box: tuple[float, float, float, float]
    crossings: np.ndarray  # points where the curve meets the cell boundary
    samples: np.ndarray  # interface points strictly inside the cell trace
    area0: float
    area1: float


class Interface:
    """Base class; subclasses implement the level function and curve traces."""

    tag = "interface"

    # -- pointwise queries -------------------------------------------------
    def level(self, x, y):
        raise NotImplementedError

    def level_grad(self, x, y):
        raise NotImplementedError

    def classify(self, x, y):
        """0 for Omega0, 1 for Omega1; |level| <= TIE_TOL goes to Omega0."""
        lv = np.asarray(self.level(x, y))
        return np.where(lv <= TIE_TOL, 0, 1).astype(np.int8)

    def distance(self, x, y):
        return np.abs(self.level(x, y))

    def one_sided_distance(self, x, y):
        lv = np.asarray(self.level(x, y), dtype=float)
        return np.where(lv <= TIE_TOL, -lv, 0.0).clip(min=0.0)

    def distance_grad(self, x, y, one_sided=False, side=None):
        """Gradient of d (or of the one-sided d) taken on the side of each point.

        ``side`` overrides the classification, which matters for points that
        sit on the interface within round-off.
        """
        gx, gy = self.level_grad(x, y)
        if side is None:
            side = self.classify(x, y)
        side = np.asarray(side)
        # d = -level on Omega0 and +level on Omega1
        sgn = np.where(side == 0, -1.0, 1.0)
        if one_sided:
            sgn = np.where(side == 0, -1.0, 0.0)
        return sgn * gx, sgn * gy

    def distance_value(self, x, y, one_sided=False, side=None):
        lv = np.asarray(self.level(x, y), dtype=float)
        if side is None:
            side = np.where(lv <= TIE_TOL, 0, 1)
        side = np.asarray(side)
        if one_sided:
            return np.where(side == 0, np.maximum(-lv, 0.0), 0.0)
        return np.abs(lv)

    def closest_point(self, x, y):
        raise NotImplementedError

    def frame_at(self, pt):
        """Unit normal (Omega0 -> Omega1) and tangent (normal turned +90 deg)."""
        px, py = float(pt[0]), float(pt[1])
        if abs(float(self.level(px, py))) > ON_CURVE_TOL:
            raise ValueError(f"point {pt!r} is not on the interface")
        gx, gy = self.level_grad(px, py)
        n = np.array([float(gx), float(gy)])
        n /= np.linalg.norm(n)
        return n, np.array([-n[1], n[0]])

    # -- curve traces ------------------------------------------------------
    def trace_in_box(self, box):
        """Parameter intervals of the curve lying inside the closed box."""
        raise NotImplementedError

    def curve_point(self, t):
        raise NotImplementedError

    def curve_speed(self, t):
        raise NotImplementedError

    def roots_along(self, axis, fixed, lo, hi):
        """Zeros of the level on the open segment where coordinate ``axis``
        runs over (lo, hi) and the other coordinate equals ``fixed``."""
        raise NotImplementedError

    def tangent_points(self, axis):
        """Curve points where the level's derivative along ``axis`` vanishes."""
        return np.zeros((0, 2))

    def singular_points(self):
        """Points where the distance function is not smooth away from the curve."""
        return np.zeros((0, 2))

    def length(self):
        raise NotImplementedError

    # -- cells -------------------------------------------------------------
    def trace_length(self, box):
        return sum((b - a) * self._mean_speed(a, b) for a, b in self.trace_in_box(box))

    def _mean_speed(self, a, b):
        return float(self.curve_speed(0.5 * (a + b)))

    def is_cut(self, box):
        x0, x1, y0, y1 = box
        scale = max(x1 - x0, y1 - y0)
        return self.trace_length(box) > 1e-12 * scale

    def intersect_cell(self, box, cell=-1, npts=12):
        """CutTopology of the curve inside ``box`` or None when not cut.

        A curve that only touches the cell (zero trace length) does not cut it.
        """
        from .quadrature import cut_cell_rules

        if not self.is_cut(box):
            return None
        ivals = self.trace_in_box(box)
        crossings = []
        samples = []
        for a, b in ivals:
            crossings.append(self.curve_point(np.array([a, b])))
            tt = a + (b - a) * (np.arange(npts) + 0.5) / npts
            samples.append(self.curve_point(tt))
        crossings = np.vstack(crossings)
        samples = np.vstack(samples)
        r0, r1 = cut_cell_rules(self, box, 6)
        return CutTopology(
            cell=cell,
            box=tuple(float(v) for v in box),
            crossings=crossings,
            samples=samples,
            area0=float(r0.w.sum()),
            area1=float(r1.w.sum()),
        )


@dataclass(frozen=True)
class _Straight(Interface):
    """Straight line through ``origin`` with direction angle ``angle``."""

    def _origin(self):
        raise NotImplementedError

    def _angle(self):
        raise NotImplementedError

    @property
    def normal(self):
        a = self._angle()
        return np.array([-math.sin(a), math.cos(a)])

    @property
    def direction(self):
        a = self._angle()
        return np.array([math.cos(a), math.sin(a)])

    def level(self, x, y):
        ox, oy = self._origin()
        n = self.normal
        return n[0] * (np.asarray(x) - ox) + n[1] * (np.asarray(y) - oy)

    def level_grad(self, x, y):
        n = self.normal
        shape = np.shape(np.asarray(x) + np.asarray(y))
        return np.full(shape, n[0]), np.full(shape, n[1])

    def closest_point(self, x, y):
        lv = self.level(x, y)
        n = self.normal
        return np.asarray(x) - lv * n[0], np.asarray(y) - lv * n[1]

    def curve_point(self, t):
        ox, oy = self._origin()
        d = self.direction
        t = np.asarray(t, dtype=float)
        return np.stack([ox + t * d[0], oy + t * d[1]], axis=-1)

    def curve_speed(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def trace_in_box(self, box):
        # Liang-Barsky clipping of the infinite line
        x0, x1, y0, y1 = box
        ox, oy = self._origin()
        d = self.direction
        lo, hi = -np.inf, np.inf
        for comp, start, a, b in ((d[0], ox, x0, x1), (d[1], oy, y0, y1)):
            if abs(comp) < 1e-15:
                if start < a - TIE_TOL or start > b + TIE_TOL:
                    return []
                continue
            ta, tb = (a - start) / comp, (b - start) / comp
            lo = max(lo, min(ta, tb))
            hi = min(hi, max(ta, tb))
        if hi - lo <= 0:
            return []
        return [(float(lo), float(hi))]

    def roots_along(self, axis, fixed, lo, hi):
        n = self.normal
        ox, oy = self._origin()
        if abs(n[axis]) < 1e-15:
            return []
        if axis == 0:
            v = ox - n[1] * (fixed - oy) / n[0]
        else:
            v = oy - n[0] * (fixed - ox) / n[1]
        return [v] if lo < v < hi else []

    def length(self):
        return self.trace_length((0.0, 1.0, 0.0, 1.0))


@dataclass(frozen=True)
class Line(_Straight):
    """y = tan(theta0) (x - 1 - beta) + 1; Omega0 lies below."""

    theta0: float = math.pi / 6
    beta: float = 1 / math.pi
    tag = "line"

    def __post_init__(self):
        if not -math.pi / 2 < self.theta0 < math.pi / 2:
            raise ValueError("theta0 must lie in (-pi/2, pi/2)")

    def _origin(self):
        return (1.0 + self.beta, 1.0)

    def _angle(self):
        return self.theta0

    def height(self, x):
        return math.tan(self.theta0) * (np.asarray(x) - 1.0 - self.beta) + 1.0


@dataclass(frozen=True)
class HLine(_Straight):
    """Horizontal line y = 0.5 + delta; Omega0 lies below."""

    delta: float = 0.0
    tag = "hline"

    def _origin(self):
        return (0.0, 0.5 + self.delta)

    def _angle(self):
        return 0.0


@dataclass(frozen=True)
class Circle(Interface):
    """Circle; Omega0 is the disk interior."""

    center: tuple[float, float] = (1 / math.sqrt(5), 1 / math.sqrt(3))
    radius: float = 1 / math.sqrt(10)
    tag = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def _rho(self, x, y):
        return np.hypot(np.asarray(x) - self.center[0], np.asarray(y) - self.center[1])

    def level(self, x, y):
        return self._rho(x, y) - self.radius

    def level_grad(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        rho = np.hypot(dx, dy)
        safe = np.where(rho > 0, rho, 1.0)
        gx = np.where(rho > 0, dx / safe, 1.0)
        gy = np.where(rho > 0, dy / safe, 0.0)
        return gx, gy

    def closest_point(self, x, y):
        gx, gy = self.level_grad(x, y)
        return self.center[0] + self.radius * gx, self.center[1] + self.radius * gy

    def curve_point(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)],
            axis=-1,
        )

    def curve_speed(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.radius)

    def trace_in_box(self, box):
        x0, x1, y0, y1 = box
        cx, cy = self.center
        r = self.radius
        cuts = [0.0, 2 * math.pi]
        for a, c in ((x0, cx), (x1, cx)):
            u = (a - c) / r
            if abs(u) <= 1:
                th = math.acos(u)
                cuts += [th, 2 * math.pi - th]
        for a, c in ((y0, cy), (y1, cy)):
            u = (a - c) / r
            if abs(u) <= 1:
                th = math.asin(u)
                cuts += [th % (2 * math.pi), (math.pi - th) % (2 * math.pi)]
        cuts = np.unique(np.clip(cuts, 0.0, 2 * math.pi))
        tol = 1e-14 * max(1.0, r)
        ivals = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 1e-15:
                continue
            px, py = self.curve_point(0.5 * (a + b))
            if x0 - tol <= px <= x1 + tol and y0 - tol <= py <= y1 + tol:
                if ivals and abs(ivals[-1][1] - a) < 1e-15:
                    ivals[-1] = (ivals[-1][0], float(b))
                else:
                    ivals.append((float(a), float(b)))
        # merge across the 0 / 2pi seam
        if len(ivals) > 1 and ivals[0][0] == 0.0 and ivals[-1][1] == 2 * math.pi:
            a, _ = ivals.pop()
            ivals[0] = (a - 2 * math.pi, ivals[0][1])
        return ivals

    def roots_along(self, axis, fixed, lo, hi):
        c_in = self.center[axis]
        c_out = self.center[1 - axis]
        rhs = self.radius**2 - (fixed - c_out) ** 2
        if rhs <= 0:
            return []
        s = math.sqrt(rhs)
        return [v for v in (c_in - s, c_in + s) if lo < v < hi]

    def tangent_points(self, axis):
        cx, cy = self.center
        r = self.radius
        if axis == 1:
            return np.array([[cx - r, cy], [cx + r, cy]])
        return np.array([[cx, cy - r], [cx, cy + r]])

    def singular_points(self):
        return np.array([self.center], dtype=float)

    def length(self):
        return 2 * math.pi * self.radius


def make_geometry(tag: str, **kw) -> Interface:
    if tag == "line":
        return Line(**kw)
    if tag == "circle":
        return Circle(**kw)
    if tag == "hline":
        return HLine(**kw)
    raise ValueError(f"unknown geometry {tag!r}; expected line, circle or hline")
