"""Radial grids and finite-difference stencils on nonuniform nodes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DiscretizationError


def fornberg_weights(x0: float, x: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights at ``x0`` for derivatives 0..order (Fornberg 1988)."""
    x = np.asarray(x, dtype=np.float64)
    m = len(x)
    c = np.zeros((order + 1, m))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def check_radii(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or len(r) < 3:
        raise DiscretizationError("a radial grid needs at least 3 nodes")
    if r[0] < 0.0 or np.any(np.diff(r) <= 0.0):
        raise DiscretizationError("radii must be nonnegative and strictly increasing")
    return r


def derivative_matrices(r):
    """Sparse first/second derivative operators on the nodes ``r``.

    Interior rows use the three-point central stencil; end rows use
    one-sided stencils (3 points for u', 4 for u'').  A node at r = 0 is
    treated as the centre of a ball: u'(0) = 0 and u''(0) = 2(u_1 - u_0)/r_1^2.
    """
    r = check_radii(r)
    N = len(r)
    d1 = sp.lil_matrix((N, N))
    d2 = sp.lil_matrix((N, N))
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    i = np.arange(1, N - 1)
    d1[i, i - 1] = -hp / (hm * (hm + hp))
    d1[i, i] = (hp - hm) / (hm * hp)
    d1[i, i + 1] = hm / (hp * (hm + hp))
    d2[i, i - 1] = 2.0 / (hm * (hm + hp))
    d2[i, i] = -2.0 / (hm * hp)
    d2[i, i + 1] = 2.0 / (hp * (hm + hp))
    last = r[-4:] if N >= 4 else r[-3:]
    w = fornberg_weights(r[-1], last, 2)
    d1[N - 1, N - len(last):] = w[1]
    d2[N - 1, N - len(last):] = w[2]
    if r[0] == 0.0:
        d2[0, 0] = -2.0 / r[1] ** 2
        d2[0, 1] = 2.0 / r[1] ** 2
    else:
        first = r[:4] if N >= 4 else r[:3]
        w = fornberg_weights(r[0], first, 2)
        d1[0, : len(first)] = w[1]
        d2[0, : len(first)] = w[2]
    return d1.tocsr(), d2.tocsr()


@dataclass(frozen=True)
class GridSpec:
    """Node count and spacing law.

    ``law`` is ``"uniform"``, ``"clustered"`` or ``"log"`` (uniform in
    log(1 + r), for very large balls).  Clustered grids are the image of a
    uniform grid under a smooth sinh/tanh stretching, so the three-point
    stencils keep second-order accuracy; ``stretch`` sets how strongly
    nodes crowd the Dirichlet boundary (4.5 gives a boundary spacing about
    one tenth of the uniform one).
    """

    nodes: int
    law: str = "uniform"
    stretch: float = 4.5

    def to_dict(self):
        return {"nodes": self.nodes, "law": self.law, "stretch": self.stretch}


def _clustered_unit(count, stretch, two_sided):
    xi = np.linspace(0.0, 1.0, count)
    if stretch <= 0.0:
        return xi
    if two_sided:
        return 0.5 * (1.0 + np.tanh(0.5 * stretch * (2.0 * xi - 1.0)) / np.tanh(0.5 * stretch))
    return 1.0 - np.sinh(stretch * (1.0 - xi)) / np.sinh(stretch)


def build_grid(r0: float, r1: float, grid: GridSpec, cluster_inner: bool = False) -> np.ndarray:
    """Nodes on [r0, r1] following ``grid.law``; ``cluster_inner`` also clusters at r0."""
    if not r1 > r0 >= 0.0:
        raise DiscretizationError(f"bad interval [{r0}, {r1}]")
    N = int(grid.nodes)
    if N < 3:
        raise DiscretizationError("a radial grid needs at least 3 nodes")
    if grid.law == "uniform":
        r = np.linspace(r0, r1, N)
    elif grid.law == "clustered":
        r = r0 + (r1 - r0) * _clustered_unit(N, grid.stretch, cluster_inner)
    elif grid.law == "log":
        r = np.expm1(np.linspace(np.log1p(r0), np.log1p(r1), N))
    else:
        raise DiscretizationError(f"unknown grid law {grid.law!r}")
    r[0], r[-1] = r0, r1
    return check_radii(r)
