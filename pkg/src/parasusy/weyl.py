"""Exact differential operators with polynomial coefficients over the rationals.

An operator is a finite sum ``sum_k p_k(x) * d^k`` where ``d`` is the
x-derivative. Composition follows the Leibniz rule ``d o p = p d + p'``, so
every identity between operators can be decided by exact comparison of
normal forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence, Union

Scalar = Union[int, Fraction]


@dataclass(frozen=True)
class Poly:
    """Dense polynomial ``sum_k coeffs[k] x^k`` with exact rational coefficients."""

    coeffs: tuple[Fraction, ...] = ()

    def __post_init__(self):
        cs = [Fraction(c) for c in self.coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @classmethod
    def const(cls, c: Scalar) -> Poly:
        return cls((c,))

    @classmethod
    def x(cls) -> Poly:
        return cls((0, 1))

    @classmethod
    def linear(cls, slope: Scalar, intercept: Scalar = 0) -> Poly:
        return cls((intercept, slope))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __add__(self, other) -> Poly:
        other = as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Poly(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(tuple(-c for c in self.coeffs))

    def __sub__(self, other) -> Poly:
        return self + (-as_poly(other))

    def __rsub__(self, other) -> Poly:
        return as_poly(other) - self

    def __mul__(self, other) -> Poly:
        other = as_poly(other)
        if not self.coeffs or not other.coeffs:
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Poly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Poly:
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def derivative(self, times: int = 1) -> Poly:
        cs = self.coeffs
        for _ in range(times):
            cs = tuple(k * c for k, c in enumerate(cs))[1:]
        return Poly(cs)

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            sign = "-" if c < 0 else "+"
            mag = -c if c < 0 else c
            if k == 0:
                body = str(mag)
            else:
                mono = "x" if k == 1 else f"x^{k}"
                body = mono if mag == 1 else f"{mag}*{mono}"
            parts.append((sign, body))
        first_sign, first = parts[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += sign + body
        return text


def as_poly(value) -> Poly:
    if isinstance(value, Poly):
        return value
    return Poly.const(value)


@dataclass(frozen=True)
class DiffOp:
    """Operator ``sum_k terms[k] * d^k``; zero coefficients are never stored."""

    terms: tuple[tuple[int, Poly], ...] = ()

    def __post_init__(self):
        merged: dict[int, Poly] = {}
        for k, p in self.terms:
            if k < 0:
                raise ValueError("derivative order must be nonnegative")
            merged[k] = merged.get(k, Poly()) + as_poly(p)
        object.__setattr__(
            self, "terms", tuple(sorted((k, p) for k, p in merged.items() if p))
        )

    @classmethod
    def from_dict(cls, terms: Mapping[int, Poly]) -> DiffOp:
        return cls(tuple(terms.items()))

    @classmethod
    def mul(cls, p) -> DiffOp:
        """Multiplication by the polynomial (or scalar) ``p``."""
        return cls(((0, as_poly(p)),))

    @classmethod
    def d(cls, k: int = 1) -> DiffOp:
        return cls(((k, Poly.const(1)),))

    @classmethod
    def zero(cls) -> DiffOp:
        return cls()

    @property
    def as_dict(self) -> dict[int, Poly]:
        return dict(self.terms)

    @property
    def order(self) -> int:
        """Highest derivative order; -1 for the zero operator."""
        return self.terms[-1][0] if self.terms else -1

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other) -> DiffOp:
        other = as_diffop(other)
        return DiffOp(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> DiffOp:
        return DiffOp(tuple((k, -p) for k, p in self.terms))

    def __sub__(self, other) -> DiffOp:
        return self + (-as_diffop(other))

    def __rsub__(self, other) -> DiffOp:
        return as_diffop(other) - self

    def scale(self, c) -> DiffOp:
        c = as_poly(c)
        return DiffOp(tuple((k, c * p) for k, p in self.terms))

    def __matmul__(self, other) -> DiffOp:
        return compose(self, as_diffop(other))

    def __mul__(self, other) -> DiffOp:
        if isinstance(other, DiffOp):
            return compose(self, other)
        return self.scale(other)

    def __rmul__(self, other) -> DiffOp:
        return as_diffop(other) @ self

    def __pow__(self, k: int) -> DiffOp:
        out = DiffOp.mul(1)
        for _ in range(k):
            out = compose(out, self)
        return out

    def apply(self, f: Poly) -> Poly:
        """Act on a polynomial function."""
        out = Poly()
        for k, p in self.terms:
            out = out + p * f.derivative(k)
        return out

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"({p})*d^{k}" for k, p in self.terms)


def as_diffop(value) -> DiffOp:
    if isinstance(value, DiffOp):
        return value
    return DiffOp.mul(value)


def compose(a: DiffOp, b: DiffOp) -> DiffOp:
    """Return ``a o b`` in normal form.

    Uses the general Leibniz rule ``d^m o q = sum_j C(m, j) q^(j) d^(m-j)``.
    """
    out: dict[int, Poly] = {}
    for m, p in a.terms:
        for n, q in b.terms:
            for j in range(min(m, q.degree) + 1):
                coef = p * q.derivative(j) * comb(m, j)
                if coef:
                    k = m - j + n
                    out[k] = out.get(k, Poly()) + coef
    return DiffOp.from_dict(out)


def adjoint(a: DiffOp) -> DiffOp:
    """Formal L2 adjoint ``sum_k (-d)^k o p_k``."""
    out = DiffOp()
    for k, p in a.terms:
        out = out + compose(DiffOp.d(k), DiffOp.mul(p)).scale((-1) ** k)
    return out


def commutator(a: DiffOp, b: DiffOp) -> DiffOp:
    return compose(a, b) - compose(b, a)


@dataclass(frozen=True)
class MatrixDiffOp:
    """Square matrix whose entries are :class:`DiffOp`."""

    entries: tuple[tuple[DiffOp, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(as_diffop(e) for e in row) for row in self.entries)
        if any(len(r) != len(rows) for r in rows):
            raise ValueError("MatrixDiffOp must be square")
        object.__setattr__(self, "entries", rows)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @classmethod
    def zeros(cls, m: int) -> MatrixDiffOp:
        return cls(tuple(tuple(DiffOp() for _ in range(m)) for _ in range(m)))

    @classmethod
    def identity(cls, m: int) -> MatrixDiffOp:
        return cls.diagonal([DiffOp.mul(1)] * m)

    @classmethod
    def diagonal(cls, diag: Sequence) -> MatrixDiffOp:
        m = len(diag)
        return cls(
            tuple(
                tuple(as_diffop(diag[i]) if i == j else DiffOp() for j in range(m))
                for i in range(m)
            )
        )

    @classmethod
    def from_blocks(cls, m: int, blocks: Mapping[tuple[int, int], DiffOp]) -> MatrixDiffOp:
        rows = [[DiffOp() for _ in range(m)] for _ in range(m)]
        for (i, j), op in blocks.items():
            rows[i][j] = as_diffop(op)
        return cls(tuple(tuple(r) for r in rows))

    def __getitem__(self, ij: tuple[int, int]) -> DiffOp:
        i, j = ij
        return self.entries[i][j]

    def _check(self, other: MatrixDiffOp):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: MatrixDiffOp) -> MatrixDiffOp:
        return matrix_add(self, other)

    def __sub__(self, other: MatrixDiffOp) -> MatrixDiffOp:
        return matrix_add(self, other.scale(-1))

    def __neg__(self) -> MatrixDiffOp:
        return self.scale(-1)

    def __matmul__(self, other: MatrixDiffOp) -> MatrixDiffOp:
        return matrix_compose(self, other)

    def __pow__(self, k: int) -> MatrixDiffOp:
        out = MatrixDiffOp.identity(self.dim)
        for _ in range(k):
            out = matrix_compose(out, self)
        return out

    def scale(self, c) -> MatrixDiffOp:
        return MatrixDiffOp(tuple(tuple(e.scale(c) for e in row) for row in self.entries))

    def is_zero(self) -> bool:
        return is_zero(self)

    def nonzero_entries(self) -> list[tuple[int, int, DiffOp]]:
        return [
            (i, j, e)
            for i, row in enumerate(self.entries)
            for j, e in enumerate(row)
            if not e.is_zero()
        ]

    def __str__(self) -> str:
        return "\n".join(
            f"[{i},{j}] {e}" for i, j, e in self.nonzero_entries()
        ) or "0"


def matrix_add(a: MatrixDiffOp, b: MatrixDiffOp) -> MatrixDiffOp:
    a._check(b)
    return MatrixDiffOp(
        tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a.entries, b.entries))
    )


def matrix_compose(a: MatrixDiffOp, b: MatrixDiffOp) -> MatrixDiffOp:
    a._check(b)
    m = a.dim
    rows = []
    for i in range(m):
        row = []
        for j in range(m):
            acc = DiffOp()
            for k in range(m):
                x, y = a.entries[i][k], b.entries[k][j]
                if x.terms and y.terms:
                    acc = acc + compose(x, y)
            row.append(acc)
        rows.append(tuple(row))
    return MatrixDiffOp(tuple(rows))


def matrix_adjoint(a: MatrixDiffOp) -> MatrixDiffOp:
    """Transpose of the entrywise formal adjoints."""
    m = a.dim
    return MatrixDiffOp(
        tuple(tuple(adjoint(a.entries[j][i]) for j in range(m)) for i in range(m))
    )


def matrix_commutator(a: MatrixDiffOp, b: MatrixDiffOp) -> MatrixDiffOp:
    return matrix_compose(a, b) - matrix_compose(b, a)


def is_zero(a: Union[MatrixDiffOp, DiffOp]) -> bool:
    if isinstance(a, DiffOp):
        return a.is_zero()
    return all(e.is_zero() for row in a.entries for e in row)


def word_product(word: str, letters: Mapping[str, MatrixDiffOp]) -> MatrixDiffOp:
    """Product of a word like ``"Q Qd Q"`` (space separated letters)."""
    names = word.split()
    if not names:
        raise ValueError("empty word")
    out = letters[names[0]]
    for name in names[1:]:
        out = matrix_compose(out, letters[name])
    return out


def linear_combination(
    terms: Iterable[tuple[Scalar, MatrixDiffOp]], dim: int
) -> MatrixDiffOp:
    out = MatrixDiffOp.zeros(dim)
    for c, op in terms:
        out = matrix_add(out, op.scale(c))
    return out
