"""Numerical check of the local factorisation u ~ d * eta near the interface.

A function vanishing on the interface is expanded in Taylor coefficients
about a point of the curve, in a frame (s, t) whose first axis is the unit
normal pointing into Omega0 and whose second axis is the tangent.  The
coefficients of eta follow from a triangular recursion, and the residuals
``eps_ij = u_ij - sum d_{i-m, j-n} c_mn`` measure how well d * eta matches.

Coefficients are Taylor coefficients (derivative divided by a! b!), so the
product of two expansions is a plain convolution.  Derivatives come from
nested central differences, independent of any closed-form derivative.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

RICHARDSON_LEVELS = 2


@dataclass
class TaylorTable:
    point: np.ndarray
    normal: np.ndarray  # unit normal into Omega0
    tangent: np.ndarray
    order: int  # coefficients are available for a + b <= order
    u: np.ndarray  # u[a, b], zero above the order
    d: np.ndarray
    u_err: np.ndarray  # Richardson error estimates
    d_err: np.ndarray
    step: float

    def flipped(self) -> "TaylorTable":
        """Same expansion with the tangent reversed (t -> -t)."""
        sgn = (-1.0) ** np.arange(self.order + 1)[None, :]
        return TaylorTable(self.point, self.normal, -self.tangent, self.order,
                           self.u * sgn, self.d * sgn, self.u_err, self.d_err, self.step)


def _stencil(k):
    # centred k-th difference: offsets (k/2 - i), weights (-1)^i C(k, i)
    off = np.array([k / 2.0 - i for i in range(k + 1)])
    w = np.array([(-1.0) ** i * math.comb(k, i) for i in range(k + 1)])
    return off, w


def _mixed_derivative(F, a, b, h):
    oa, wa = _stencil(a)
    ob, wb = _stencil(b)
    S, T = np.meshgrid(oa * h, ob * h, indexing="ij")
    vals = F(S.ravel(), T.ravel()).reshape(S.shape)
    return float(wa @ vals @ wb) / h ** (a + b)


def _richardson(F, a, b, h, levels=RICHARDSON_LEVELS):
    """Extrapolate the O(h^2) difference quotient over steps h, 2h, 4h, ...

    Larger steps rather than smaller ones keep roundoff in the high-order
    quotients at the level of the base step.
    """
    col = [_mixed_derivative(F, a, b, h * 2**k) for k in range(levels + 1)]
    prev = col[0]
    for lev in range(1, levels + 1):
        f = 4.0**lev
        col = [(f * col[k] - col[k + 1]) / (f - 1.0) for k in range(len(col) - 1)]
        if lev == levels - 1:
            prev = col[0]
    return col[0], abs(col[0] - prev)


def frame(geom, point):
    """Normal into Omega0 and tangent (normal turned +90 degrees) at ``point``."""
    n_out, _ = geom.frame_at(point)
    n = -n_out
    return n, np.array([-n[1], n[0]])


def signed_distance(geom):
    """Distance positive in Omega0, smooth across the interface."""
    return lambda x, y: -np.asarray(geom.level(x, y), dtype=float)


def default_step(geom):
    r0 = getattr(geom, "radius", 1.0)
    return 1e-2 * min(1.0, r0)


def taylor_table(geom, func, point, p, step=None) -> TaylorTable:
    """Taylor coefficients of ``func`` and of the distance up to order p + 1."""
    point = np.asarray(point, dtype=float)
    n, tau = frame(geom, point)
    h = default_step(geom) if step is None else float(step)
    order = p + 1
    dist = signed_distance(geom)

    def local(f):
        return lambda s, t: np.asarray(
            f(point[0] + s * n[0] + t * tau[0], point[1] + s * n[1] + t * tau[1]), dtype=float)

    out = []
    for f in (local(func), local(dist)):
        c = np.zeros((order + 1, order + 1))
        e = np.zeros_like(c)
        for a in range(order + 1):
            for b in range(order + 1 - a):
                val, err = _richardson(f, a, b, h)
                fac = math.factorial(a) * math.factorial(b)
                c[a, b], e[a, b] = val / fac, err / fac
        out.append((c, e))
    (u, ue), (d, de) = out
    return TaylorTable(point, n, tau, order, u, d, ue, de, h)


def eta_coefficients(table: TaylorTable, p: int) -> np.ndarray:
    """c[m, n] for m + n < p, swept level by level.

    c_mn = u_{m+1,n} - sum_{i+j<l} c_ij d_{m+1-i, n-j}, with l = m + n; the
    unit pivot d_{1,0} multiplies c_mn itself.
    """
    if p + 1 > table.order:
        raise ValueError("table order too low for this p")
    u, d = table.u, table.d
    c = np.zeros((p, p))
    for lev in range(p):
        for m in range(lev, -1, -1):
            nn = lev - m
            acc = u[m + 1, nn]
            for i in range(m + 2):
                for j in range(nn + 1):
                    if i + j < lev:
                        acc -= c[i, j] * d[m + 1 - i, nn - j]
            c[m, nn] = acc
    return c


def residuals(table: TaylorTable, c: np.ndarray, p: int) -> np.ndarray:
    """eps[i, j] for i + j <= p (NaN elsewhere)."""
    u, d = table.u, table.d
    q = c.shape[0]
    eps = np.full((p + 1, p + 1), np.nan)
    for i in range(p + 1):
        for j in range(p + 1 - i):
            acc = u[i, j]
            for m in range(min(i, q - 1) + 1):
                for nn in range(min(j, q - 1) + 1):
                    if m + nn < q:
                        acc -= d[i - m, j - nn] * c[m, nn]
            eps[i, j] = acc
    return eps


def residual_check(table: TaylorTable, c: np.ndarray, p: int, relative=True) -> float:
    """Max |eps_ij| over i + j <= p; scaled by max(1, max |u_ab|) if relative."""
    eps = residuals(table, c, p)
    r = float(np.nanmax(np.abs(eps)))
    if relative:
        r /= max(1.0, float(np.abs(table.u).max()))
    return r


# -- canned cases for the CLI --------------------------------------------------

def flat_case(geom=None):
    """Line interface with u = d (1 + s), s the normal coordinate of the point."""
    from .geometry import Line

    geom = geom or Line()
    points = [np.array(geom.closest_point(x, y), dtype=float)
              for x, y in ((0.3, 0.5), (0.6, 0.6), (0.5, 0.2))]
    dist = signed_distance(geom)

    def make(pt):
        return lambda x, y: dist(x, y) * (1.0 + dist(x, y))

    return geom, [(pt, make(pt)) for pt in points]


def circle_case(geom=None, kappa0=1.0, kappa1=20.0):
    """Difference of the two smooth pieces of the circle problem's solution."""
    from .geometry import Circle

    geom = geom or Circle()
    cx, cy = geom.center
    r0 = geom.radius

    def jump(x, y):
        X, Y = np.asarray(x) - cx, np.asarray(y) - cy
        r2 = X**2 + Y**2
        return (kappa1 - kappa0) * (X**2 - Y**2) * (1.0 / r2**2 - 1.0 / r0**4)

    angles = (0.3, 1.9, 4.0)
    points = [np.array([cx + r0 * math.cos(a), cy + r0 * math.sin(a)]) for a in angles]
    return geom, [(pt, jump) for pt in points]


@dataclass
class LemmaRow:
    point: tuple[float, float]
    p: int
    residual: float
    fd_error: float
    c00: float


def verify(geom_tag: str, p: int) -> list[LemmaRow]:
    if geom_tag in ("line", "flat", "hline"):
        geom, cases = flat_case()
    elif geom_tag == "circle":
        geom, cases = circle_case()
    else:
        raise ValueError(f"unknown geometry {geom_tag!r}")
    rows = []
    for pt, func in cases:
        tab = taylor_table(geom, func, pt, p)
        c = eta_coefficients(tab, p)
        res = residual_check(tab, c, p)
        fd = float(np.abs(tab.u_err).max()) / max(1.0, float(np.abs(tab.u).max()))
        rows.append(LemmaRow((float(pt[0]), float(pt[1])), p, res, fd, float(c[0, 0])))
        logger.debug("lemma p=%d at %s: residual %.3e", p, pt, res)
    return rows
