"""Superpotential descriptors, constraint solvers and physics presets.

A superpotential is any object with ``value``, ``derivative`` and
``antiderivative`` methods acting on numpy arrays.  Closed-form kinds carry
analytic derivatives; tabulated ones use fourth-order finite differences and
cubic-spline evaluation between nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .grid import Grid, antiderivative
from .weyl import Poly

#: relative tolerance on the spread of a constraint expression around its mean
CONSTANT_TOL = 1e-6


class SuperpotentialError(ValueError):
    """Invalid superpotential data, or a failed construction."""

    def __init__(self, message: str, x: Optional[float] = None):
        super().__init__(message)
        self.x = x


class RiccatiBlowUp(SuperpotentialError):
    """The Riccati solution left the configured bound at abscissa ``x``."""


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class Linear:
    k1: float
    k2: float = 0.0
    kind = "linear"

    def value(self, x):
        return self.k1 * np.asarray(x, dtype=float) + self.k2

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.k1)

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.k1 * x**2 + self.k2 * x

    def poly(self) -> Poly:
        return Poly.linear(Fraction(self.k1), Fraction(self.k2))

    def to_json(self) -> dict:
        return {"kind": "linear", "k1": self.k1, "k2": self.k2}


@dataclass(frozen=True)
class Exponential:
    """``k1 * exp(-alpha x) + k2``."""

    k1: float
    k2: float
    alpha: float
    kind = "exponential"

    def __post_init__(self):
        if self.alpha == 0:
            raise SuperpotentialError("exponential superpotential needs alpha != 0")

    def value(self, x):
        return self.k1 * np.exp(-self.alpha * np.asarray(x, dtype=float)) + self.k2

    def derivative(self, x):
        return -self.alpha * self.k1 * np.exp(-self.alpha * np.asarray(x, dtype=float))

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        return -self.k1 / self.alpha * np.exp(-self.alpha * x) + self.k2 * x

    def poly(self):
        return None

    def to_json(self) -> dict:
        return {"kind": "exponential", "k1": self.k1, "k2": self.k2, "alpha": self.alpha}


@dataclass(frozen=True)
class Sine:
    """``amplitude * sin(frequency x)``; mostly used as the ``K`` function of solve_p2."""

    amplitude: float = 1.0
    frequency: float = 1.0
    kind = "sine"

    def value(self, x):
        return self.amplitude * np.sin(self.frequency * np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.amplitude * self.frequency * np.cos(self.frequency * np.asarray(x, dtype=float))

    def second_derivative(self, x):
        return -self.amplitude * self.frequency**2 * np.sin(self.frequency * np.asarray(x, dtype=float))

    def antiderivative(self, x):
        return -self.amplitude / self.frequency * np.cos(self.frequency * np.asarray(x, dtype=float))

    def poly(self):
        return None

    def to_json(self) -> dict:
        return {"kind": "sine", "amplitude": self.amplitude, "frequency": self.frequency}


def fd_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative on a uniform mesh (one-sided at the ends)."""
    f = np.asarray(values, dtype=float)
    if f.size < 5:
        raise SuperpotentialError("need at least 5 samples for a derivative")
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return out


class Tabulated:
    """Samples on a uniform mesh, evaluated by cubic spline between nodes."""

    kind = "tabulated"

    def __init__(self, x: np.ndarray, values: np.ndarray, deriv: Optional[np.ndarray] = None):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.shape != values.shape or x.ndim != 1:
            raise SuperpotentialError("tabulated x and values must be 1D of equal length")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise SuperpotentialError("non-finite tabulated value", x=float(x[bad]))
        self.x = x
        self.values = values
        h = x[1] - x[0]
        self.deriv = fd_derivative(values, h) if deriv is None else np.asarray(deriv, dtype=float)
        self._f = CubicSpline(x, values)
        self._df = CubicSpline(x, self.deriv)
        self._F = antiderivative(values, _GridView(x))

    @classmethod
    def on_grid(cls, grid: Grid, values) -> Tabulated:
        return cls(grid.x, values)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def _sample(self, spline, table, x):
        x = np.asarray(x, dtype=float)
        if x.shape == self.x.shape and np.array_equal(x, self.x):
            return table.copy()
        return spline(x)

    def value(self, x):
        return self._sample(self._f, self.values, x)

    def derivative(self, x):
        return self._sample(self._df, self.deriv, x)

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape == self.x.shape and np.array_equal(x, self.x):
            return self._F.copy()
        return self._f.antiderivative()(x) - self._f.antiderivative()(self.x[0])

    def poly(self):
        return None

    def to_json(self) -> dict:
        return {"kind": "tabulated", "values": [float(v) for v in self.values]}

    def __repr__(self) -> str:
        return f"Tabulated(n={self.x.size}, domain={self.domain})"


class _GridView:
    """Duck-typed stand-in for :class:`Grid` over an explicit node array."""

    def __init__(self, x: np.ndarray):
        self.x = x
        self.n = x.size
        self.h = float(x[1] - x[0])


class Callable1D:
    """Arbitrary callables; the derivative falls back to a central difference."""

    kind = "callable"

    def __init__(self, f: Callable, df: Optional[Callable] = None, F: Optional[Callable] = None):
        self.f, self.df, self.F = f, df, F

    def value(self, x):
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.df is not None:
            return np.asarray(self.df(x), dtype=float)
        eps = 1e-5 * np.maximum(1.0, np.abs(x))
        return (self.value(x + eps) - self.value(x - eps)) / (2 * eps)

    def antiderivative(self, x):
        if self.F is None:
            raise SuperpotentialError("callable superpotential has no antiderivative")
        return np.asarray(self.F(np.asarray(x, dtype=float)), dtype=float)

    def poly(self):
        return None

    def to_json(self) -> dict:
        raise SuperpotentialError("callable superpotentials are not serializable")


def descriptor_from_json(obj: dict, grid: Optional[Grid] = None):
    """Build a single function descriptor from its JSON object."""
    kind = obj.get("kind")
    if kind == "linear":
        return Linear(float(obj["k1"]), float(obj.get("k2", 0.0)))
    if kind == "exponential":
        return Exponential(float(obj["k1"]), float(obj["k2"]), float(obj["alpha"]))
    if kind == "sine":
        return Sine(float(obj.get("amplitude", 1.0)), float(obj.get("frequency", 1.0)))
    if kind == "zero":
        return Linear(0.0, 0.0)
    if kind == "tabulated":
        if grid is None:
            raise SuperpotentialError("tabulated descriptor needs a grid")
        values = np.asarray(obj["values"], dtype=float)
        if values.size != grid.n:
            raise SuperpotentialError(f"tabulated descriptor has {values.size} values, grid has {grid.n}")
        return Tabulated(grid.x, values)
    raise SuperpotentialError(f"unknown descriptor kind {kind!r}")


# ---------------------------------------------------------------------------
# sets and constraints


@dataclass(frozen=True)
class ConstraintParams:
    """Constants that label a constrained superpotential set; ``e`` must vanish."""

    K: object = None
    c: Optional[float] = None
    c0: Optional[float] = None
    d: Optional[float] = None
    d0: Optional[float] = None
    e: float = 0.0

    def __post_init__(self):
        if self.e != 0:
            raise SuperpotentialError(f"the Hamiltonian constant e must be 0, got {self.e}")


@dataclass(frozen=True)
class SuperpotentialSet:
    p: int
    W: tuple
    params: ConstraintParams = field(default_factory=ConstraintParams)

    def __post_init__(self):
        if self.p not in (1, 2, 3):
            raise SuperpotentialError(f"order p must be 1, 2 or 3, got {self.p}")
        if len(self.W) != self.p:
            raise SuperpotentialError(f"order {self.p} needs {self.p} superpotentials, got {len(self.W)}")
        object.__setattr__(self, "W", tuple(self.W))

    @property
    def is_polynomial(self) -> bool:
        return all(w.poly() is not None for w in self.W)

    def polys(self) -> list[Poly]:
        out = [w.poly() for w in self.W]
        if any(p is None for p in out):
            raise SuperpotentialError("symbolic lowering needs polynomial (linear) superpotentials")
        return out

    def flipped(self) -> SuperpotentialSet:
        """``W -> -W`` for every component."""
        return SuperpotentialSet(self.p, tuple(negate(w) for w in self.W))

    def to_json(self) -> dict:
        return {"p": self.p, "superpotentials": [w.to_json() for w in self.W]}


def negate(w):
    if isinstance(w, Linear):
        return Linear(-w.k1, -w.k2)
    if isinstance(w, Exponential):
        return Exponential(-w.k1, -w.k2, w.alpha)
    if isinstance(w, Tabulated):
        return Tabulated(w.x, -w.values, -w.deriv)
    return Callable1D(lambda x: -w.value(x), lambda x: -w.derivative(x), lambda x: -w.antiderivative(x))


def translate(w, a: float):
    """``x -> W(x + a)``."""
    if isinstance(w, Linear):
        return Linear(w.k1, w.k2 + w.k1 * a)
    if isinstance(w, Exponential):
        return Exponential(w.k1 * math.exp(-w.alpha * a), w.k2, w.alpha)
    return Callable1D(lambda x: w.value(x + a), lambda x: w.derivative(x + a), lambda x: w.antiderivative(x + a))


@dataclass
class ConstraintResidual:
    name: str
    constant: float
    residual: np.ndarray
    max_norm: float
    valid: bool

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "constant": self.constant,
            "max_deviation": self.max_norm,
            "valid": self.valid,
        }


def _constraint_expression(wa, wb, x):
    # W_b^2 - W_a^2 + W_b' + W_a'
    return wb.value(x) ** 2 - wa.value(x) ** 2 + wb.derivative(x) + wa.derivative(x)


def residual_constraints(S: SuperpotentialSet, grid: Grid) -> list[ConstraintResidual]:
    """Deviation of each constraint expression from its best constant (the mean)."""
    if S.p < 2:
        raise SuperpotentialError("constraints exist only for p >= 2")
    names = ["constraint_c", "constraint_d"]
    out = []
    for i in range(S.p - 1):
        expr = _constraint_expression(S.W[i], S.W[i + 1], grid.x)
        const = float(np.mean(expr))
        dev = expr - const
        mx = float(np.max(np.abs(dev)))
        out.append(ConstraintResidual(names[i], const, dev, mx, mx <= CONSTANT_TOL * (1 + abs(const))))
    return out


# ---------------------------------------------------------------------------
# solvers


def _exp_checked(values: np.ndarray, grid: Grid) -> np.ndarray:
    with np.errstate(over="ignore"):
        out = np.exp(values)
    bad = ~np.isfinite(out)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise SuperpotentialError(f"exp(K) overflows at x={grid.x[k]:.6g}", x=float(grid.x[k]))
    return out


def solve_p2(K, c: float, c0: float, grid: Grid) -> tuple[Tabulated, Tabulated]:
    """Pair ``(W1, W2)`` solving the first constraint for a given ``K = int (W2 - W1)``.

    ``W1 + W2 = exp(-K) (c0 + c int_0^x exp(K))`` and ``W1 - W2 = -K'``.  The
    integral is a cumulative trapezoid sum anchored at 0,
    with the Euler-Maclaurin endpoint correction using ``(e^K)' = K' e^K``.
    """
    x = grid.x
    Kx = np.asarray(K.value(x), dtype=float)
    dK = np.asarray(K.derivative(x), dtype=float)
    eK = _exp_checked(Kx, grid)
    emK = _exp_checked(-Kx, grid)
    f = eK
    df = dK * eK
    I = antiderivative(f, grid) - grid.h**2 / 12.0 * (df - df[0])
    k = grid.index_nearest(0.0)
    # the integral is anchored at 0 exactly, not at the nearest node
    gap = np.linspace(0.0, x[k], 201)
    I = I - I[k] + simpson(np.exp(np.asarray(K.value(gap), dtype=float)), x=gap)
    S = emK * (c0 + c * I)
    W1 = 0.5 * (-dK + S)
    W2 = 0.5 * (dK + S)
    return Tabulated(x, W1), Tabulated(x, W2)


def _rk4_march(f, x0: float, y0: float, nodes: Sequence[float], max_step: float, bound: float) -> list[float]:
    ys = []
    x, y = x0, y0
    for target in nodes:
        span = target - x
        m = max(1, int(math.ceil(abs(span) / max_step - 1e-12)))
        dx = span / m
        for _ in range(m):
            k1 = f(x, y)
            k2 = f(x + dx / 2, y + dx / 2 * k1)
            k3 = f(x + dx / 2, y + dx / 2 * k2)
            k4 = f(x + dx, y + dx * k3)
            y = y + dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            x = x + dx
            if not math.isfinite(y) or abs(y) > bound:
                raise RiccatiBlowUp(f"Riccati solution exceeds {bound:g} near x={x:.6g}", x=x)
        ys.append(y)
    return ys


def solve_p3_riccati(W2, d: float, d0: float, grid: Grid, bound: float = 1e6, substep: Optional[float] = None) -> Tabulated:
    """Integrate ``W3' = d + W2^2 - W2' - W3^2`` from ``W3(0) = d0`` outward.

    Classical RK4 with substeps no larger than the mesh spacing.  Raises
    :class:`RiccatiBlowUp` when ``|W3|`` exceeds ``bound``.
    """
    step = grid.h if substep is None else min(substep, grid.h)

    def rhs(x, y):
        w = float(W2.value(np.array([x]))[0])
        dw = float(W2.derivative(np.array([x]))[0])
        return d + w * w - dw - y * y

    x = grid.x
    x0 = min(max(0.0, grid.x_min), grid.x_max)
    right = x[x >= x0]
    left = x[x < x0][::-1]
    out = np.empty_like(x)
    if right.size:
        out[x >= x0] = _rk4_march(rhs, x0, d0, right, step, bound)
    if left.size:
        out[x < x0] = _rk4_march(rhs, x0, d0, left, step, bound)[::-1]
    return Tabulated(x, out)


# ---------------------------------------------------------------------------
# presets


def preset(kind: str, k1: float, k2: float = 0.0, alpha: float = 0.0) -> SuperpotentialSet:
    """Equal-slope triples ``W3 = W2 + alpha = W1 + 2 alpha``.

    ``harmonic`` (alpha = 0): ``W1 = k1 x + k2``, an oscillator in a uniform
    field.  ``morse`` (alpha != 0): ``W1 = k1 exp(-alpha x) + k2``.
    """
    if kind == "harmonic":
        if alpha != 0 or k1 == 0:
            raise SuperpotentialError("harmonic preset needs alpha = 0 and k1 != 0")
        W = (Linear(k1, k2),) * 3
        c = d = 2.0 * k1
    elif kind == "morse":
        if alpha == 0:
            raise SuperpotentialError("morse preset needs alpha != 0")
        W = tuple(Exponential(k1, k2 + j * alpha, alpha) for j in range(3))
        c = 2 * alpha * k2 + alpha**2
        d = 2 * alpha * k2 + 3 * alpha**2
    else:
        raise SuperpotentialError(f"unknown preset {kind!r}")
    return SuperpotentialSet(3, W, ConstraintParams(c=c, d=d))


def potential(S: SuperpotentialSet, x) -> np.ndarray:
    """Common potential ``sum W_i^2 / (2p)``."""
    return sum(w.value(x) ** 2 for w in S.W) / (2 * S.p)


def magnetic_field(S: SuperpotentialSet, x) -> np.ndarray:
    """Common slope ``W_i'``; only meaningful for the equal-slope presets."""
    return S.W[0].derivative(x)
