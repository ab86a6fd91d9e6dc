"""Uniform interior mesh with Dirichlet ends, finite-difference stencils and quadrature."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid:
    """``n`` interior points of ``[x_min, x_max]``; both ends are Dirichlet nodes."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"need an integer n >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n + 1)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(1, self.n + 1)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def refined(self) -> Grid:
        """Same interval with the spacing halved."""
        return Grid(self.x_min, self.x_max, 2 * self.n + 1)

    def index_nearest(self, x0: float) -> int:
        return int(np.argmin(np.abs(self.x - x0)))

    def inner(self, f: np.ndarray, g: np.ndarray):
        """h-weighted L2 inner product (conjugate-linear in ``f``)."""
        return self.h * np.vdot(f, g)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.h) * np.linalg.norm(f))

    def normalize(self, f: np.ndarray) -> np.ndarray:
        return f / self.norm(f)


def d1(grid: Grid) -> sp.csr_matrix:
    """Central first derivative; exactly antisymmetric."""
    n = grid.n
    off = np.full(n - 1, 1.0 / (2.0 * grid.h))
    return sp.diags([-off, off], [-1, 1], shape=(n, n), format="csr")


def d2(grid: Grid) -> sp.csr_matrix:
    """Three-point second derivative; symmetric negative definite."""
    n = grid.n
    inv = 1.0 / grid.h**2
    return sp.diags(
        [np.full(n - 1, inv), np.full(n, -2.0 * inv), np.full(n - 1, inv)],
        [-1, 0, 1],
        shape=(n, n),
        format="csr",
    )


def antiderivative(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Cumulative trapezoid rule anchored at ``F(x_1) = 0``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got {f.shape}")
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * grid.h * (f[1:] + f[:-1]))
    return out


def antiderivative_from(f: np.ndarray, grid: Grid, x0: float = 0.0) -> np.ndarray:
    """Antiderivative re-anchored to vanish at the grid point nearest ``x0``."""
    F = antiderivative(f, grid)
    return F - F[grid.index_nearest(x0)]


def convergence_order(hs, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = np.log(np.asarray(hs, dtype=float))
    es = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(hs, es, 1)[0])
