"""Reference shape functions on [0,1]^2 and the global nodal interpolant."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

KINDS = ("lagrange", "bernstein", "hermite")


def lagrange_1d(p, s):
    """Equispaced Lagrange polynomials of degree p and their derivatives.

    Returns two arrays of shape (p+1, len(s)).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    nodes = np.linspace(0.0, 1.0, p + 1)
    vals = np.ones((p + 1, s.size))
    ders = np.zeros((p + 1, s.size))
    for k in range(p + 1):
        others = [m for m in range(p + 1) if m != k]
        denom = np.prod([nodes[k] - nodes[m] for m in others])
        factors = [s - nodes[m] for m in others]
        vals[k] = np.prod(factors, axis=0) / denom if others else 1.0
        for skip in range(len(others)):
            term = np.ones_like(s)
            for m, f in enumerate(factors):
                if m != skip:
                    term = term * f
            ders[k] += term
        ders[k] /= denom
    return vals, ders


def bernstein_1d(p, s):
    """Bernstein polynomials B^p_i(s) and derivatives, shape (p+1, len(s))."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    i = np.arange(p + 1)[:, None]
    binom = np.array([comb(p, k) for k in range(p + 1)], dtype=float)[:, None]
    vals = binom * s**i * (1.0 - s) ** (p - i)
    ders = np.zeros_like(vals)
    if p > 0:
        lower, _ = bernstein_1d(p - 1, s)
        # B'_i = p (B^{p-1}_{i-1} - B^{p-1}_i)
        ders[1:] += p * lower
        ders[:-1] -= p * lower
    return vals, ders


def hermite_1d(s):
    """Cubic Hermite value functions H(s) = 1 - 3s^2 + 2s^3 and H(1-s)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    h0 = 1 - 3 * s**2 + 2 * s**3
    d0 = -6 * s + 6 * s**2
    return np.stack([h0, 1.0 - h0]), np.stack([d0, -d0])


_ONE_D = {
    "lagrange": lagrange_1d,
    "bernstein": bernstein_1d,
    "hermite": lambda p, s: hermite_1d(s),
}


def tensor_eval(kind, p, s, t):
    """Values and gradients of the full tensor basis at points (s, t).

    Local index k = i + j (q+1) where q is the 1D degree.
    Returns (vals, ds, dt), each of shape ((q+1)^2, npts).
    """
    fn = _ONE_D[kind]
    vs, ds = fn(p, s)
    vt, dt = fn(p, t)
    nq = vs.shape[0]
    vals = (vt[:, None, :] * vs[None, :, :]).reshape(nq * nq, -1)
    gs = (vt[:, None, :] * ds[None, :, :]).reshape(nq * nq, -1)
    gt = (dt[:, None, :] * vs[None, :, :]).reshape(nq * nq, -1)
    return vals, gs, gt


@dataclass(frozen=True)
class ReferenceBasis:
    kind: str
    degree: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def size(self):
        q = 1 if self.kind == "hermite" else self.degree
        return (q + 1) ** 2

    def nodes(self):
        """Node / control-point layout on [0,1]^2 in local order."""
        q = 1 if self.kind == "hermite" else self.degree
        g = np.linspace(0, 1, q + 1)
        ss, tt = np.meshgrid(g, g, indexing="xy")
        return np.column_stack([ss.ravel(), tt.ravel()])

    def _check(self, k):
        if not 0 <= k < self.size:
            raise IndexError(f"basis index {k} out of range for {self}")

    def eval_all(self, s, t):
        return tensor_eval(self.kind, self.degree, s, t)[0]

    def eval(self, k, s, t):
        self._check(k)
        return tensor_eval(self.kind, self.degree, s, t)[0][k]

    def grad(self, k, s, t):
        self._check(k)
        _, gs, gt = tensor_eval(self.kind, self.degree, s, t)
        return gs[k], gt[k]


@lru_cache(maxsize=None)
def reference_stiffness(p):
    """Stiffness of the Lagrange Q_p element; scale invariant in 2D."""
    from .quadrature import gauss_rule

    t, w = gauss_rule(p + 1)
    ss, tt = np.meshgrid(t, t, indexing="xy")
    ww = np.outer(w, w).ravel()
    _, gs, gt = tensor_eval("lagrange", p, ss.ravel(), tt.ravel())
    return (gs * ww) @ gs.T + (gt * ww) @ gt.T


@lru_cache(maxsize=None)
def reference_integrals(p):
    """Integral of each Lagrange Q_p shape function over [0,1]^2."""
    from .quadrature import gauss_rule

    t, w = gauss_rule(p + 1)
    ss, tt = np.meshgrid(t, t, indexing="xy")
    vals, _, _ = tensor_eval("lagrange", p, ss.ravel(), tt.ravel())
    return vals @ np.outer(w, w).ravel()


def interpolate(mesh, f):
    """Nodal coefficients of I_h f in the Lagrange FE space of the mesh."""
    xy = mesh.node_coords
    return np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(len(xy))


def evaluate_fe(mesh, coeffs, x, y, grad=False):
    """Evaluate a FE function (and optionally its gradient) at points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    cells = mesh.locate(x, y)
    org = mesh.cell_origin[cells]
    h = mesh.h
    s = (x - org[:, 0]) / h
    t = (y - org[:, 1]) / h
    vals, gs, gt = tensor_eval("lagrange", mesh.p, s, t)
    loc = np.asarray(coeffs)[mesh.cell_nodes[cells]].T
    u = (vals * loc).sum(axis=0)
    if not grad:
        return u
    return u, (gs * loc).sum(axis=0) / h, (gt * loc).sum(axis=0) / h
