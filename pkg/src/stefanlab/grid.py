"""Fixed grid on the immobilized interval y = x / s(t) in [0, 1] and its stencils."""
from __future__ import annotations

import math

import numpy as np


def make_nodes(N: int, grading: bool = True, h_min: float = 1e-8, ratio: float = 1.1) -> np.ndarray:
    """Grid nodes on [0, 1].

    Without grading this is the uniform grid ``j / N``.  With grading the
    cells next to ``y = 0`` start at ``h_min`` and grow geometrically by
    ``ratio`` until they reach the bulk spacing ``1 / N``; the remainder of
    the interval is uniform.  The refinement is static.
    """
    N = int(N)
    if N < 4:
        raise ValueError("need at least 4 cells")
    if not grading:
        return np.linspace(0.0, 1.0, N + 1)
    h = 1.0 / N
    if not (0 < h_min < h) or ratio <= 1:
        raise ValueError("grading needs 0 < h_min < 1/N and ratio > 1")
    n_geo = int(math.ceil(math.log(h / h_min) / math.log(ratio)))
    widths = h_min * ratio ** np.arange(n_geo)
    widths = widths[widths < h]
    left = float(widths.sum())
    n_uni = max(int(math.ceil((1.0 - left) / h)), 2)
    y = np.concatenate([[0.0], np.cumsum(widths),
                        left + (1.0 - left) * np.arange(1, n_uni + 1) / n_uni])
    y[-1] = 1.0
    return y


class Grid:
    """Nodes, control volumes and finite-difference weights.

    The control volume of node ``j`` spans the neighbouring cell midpoints
    (half cells at both ends), so its widths coincide with the trapezoid
    weights.  Nodal gradients use three-point formulas (centered inside,
    one-sided at the ends).
    """

    def __init__(self, y):
        y = np.asarray(y, dtype=float)
        if y[0] != 0.0 or y[-1] != 1.0 or np.any(np.diff(y) <= 0):
            raise ValueError("grid must increase strictly from 0 to 1")
        self.y = y
        self.M = y.size - 1
        h = np.diff(y)
        hm, hp = h[:-1], h[1:]
        self.hm, self.hp = hm, hp
        s = hm + hp
        # second derivative
        self.d2 = np.stack([2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)])
        # centered first derivative (exact for quadratics)
        self.d1c = np.stack([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)])
        # one-sided first derivatives at y = 0 (nodes 0,1,2) and y = 1 (nodes M-2, M-1, M)
        h1, h2 = h[0], h[1]
        self.left = np.array([-(2 * h1 + h2) / (h1 * (h1 + h2)),
                              (h1 + h2) / (h1 * h2),
                              -h1 / (h2 * (h1 + h2))])
        a, b = h[-2], h[-1]
        self.right = np.array([b / (a * (a + b)),
                               -(a + b) / (a * b),
                               (2 * b + a) / (b * (a + b))])
        # trapezoid weights: int_0^1 f dy ~ w @ f; also the dual (control-volume) widths
        w = np.zeros_like(y)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        self.trap = w
        self.h = h
        self.faces = 0.5 * (y[:-1] + y[1:])

    @property
    def size(self):
        return self.y.size

    def gradient(self, v):
        """Nodal d/dy: centered inside, one-sided at both ends."""
        g = np.empty_like(v)
        g[1:-1] = self.d1c[0] * v[:-2] + self.d1c[1] * v[1:-1] + self.d1c[2] * v[2:]
        g[0] = self.left @ v[:3]
        g[-1] = self.right @ v[-3:]
        return g

    def integrate(self, f):
        return float(self.trap @ f)
