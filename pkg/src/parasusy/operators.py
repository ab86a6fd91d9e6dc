"""Parasupercharges, Hamiltonian and number operator, numeric and symbolic.

Components are ordered ``(f_p, ..., f_1, f_0)`` top to bottom, so block row
``r`` holds the stratum with parafermion number ``p - r``.  The charge ``Q``
sits on the first block subdiagonal: block ``(r + 1, r)`` is ``-d + W_{r+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .grid import Grid, d1, d2
from .superpotential import SuperpotentialError, SuperpotentialSet, residual_constraints
from .weyl import DiffOp, MatrixDiffOp, Poly

# Coefficients of W_k' in the diagonal of 2p*H, row r = stratum p - r.
DERIVATIVE_TABLE = {
    1: ((1,), (-1,)),
    2: ((3, 1), (-1, 1), (-1, -3)),
    3: ((5, 3, 1), (-1, 3, 1), (-1, -3, 1), (-1, -3, -5)),
}


class ConstraintViolation(SuperpotentialError):
    """The superpotentials do not satisfy the constraints needed for ``H``."""


@dataclass
class GridOperator:
    """``(p+1) x (p+1)`` block operator with sparse ``n x n`` blocks (absent = zero)."""

    p: int
    grid: Grid
    blocks: dict = field(default_factory=dict)
    name: str = ""

    @property
    def size(self) -> int:
        return (self.p + 1) * self.grid.n

    @property
    def is_complex(self) -> bool:
        return any(np.iscomplexobj(b.data) for b in self.blocks.values())

    def block(self, r: int, c: int):
        return self.blocks.get((r, c))

    @property
    def matrix(self) -> sp.csr_matrix:
        m = self.p + 1
        n = self.grid.n
        dtype = complex if self.is_complex else float
        grid_blocks = [
            [self.blocks.get((r, c), None) for c in range(m)] for r in range(m)
        ]
        if all(b is None for row in grid_blocks for b in row):
            return sp.csr_matrix((m * n, m * n), dtype=dtype)
        # bmat needs at least one block per row/column to infer shapes
        for r in range(m):
            if grid_blocks[r][r] is None:
                grid_blocks[r][r] = sp.csr_matrix((n, n), dtype=dtype)
        return sp.bmat(grid_blocks, format="csr", dtype=dtype)

    def __matmul__(self, v):
        if isinstance(v, GridOperator):
            return compose_blocks(self, v)
        return self.apply(v)

    def apply(self, v: np.ndarray) -> np.ndarray:
        n = self.grid.n
        v = np.asarray(v)
        dtype = np.result_type(v.dtype, complex if self.is_complex else float)
        out = np.zeros(v.shape, dtype=dtype)
        for (r, c), b in self.blocks.items():
            out[r * n:(r + 1) * n] += b @ v[c * n:(c + 1) * n]
        return out

    @property
    def T(self) -> GridOperator:
        return GridOperator(
            self.p, self.grid, {(c, r): b.T.tocsr() for (r, c), b in self.blocks.items()}, self.name + "^T"
        )

    def conj_transpose(self) -> GridOperator:
        return GridOperator(
            self.p, self.grid, {(c, r): b.conj().T.tocsr() for (r, c), b in self.blocks.items()}, self.name + "^H"
        )

    def scale(self, s) -> GridOperator:
        return GridOperator(self.p, self.grid, {k: (s * b).tocsr() for k, b in self.blocks.items()})

    def __add__(self, other: GridOperator) -> GridOperator:
        out = dict(self.blocks)
        for k, b in other.blocks.items():
            out[k] = (out[k] + b).tocsr() if k in out else b
        return GridOperator(self.p, self.grid, out)

    def __sub__(self, other: GridOperator) -> GridOperator:
        return self + other.scale(-1)

    def is_structurally_zero(self) -> bool:
        return all(b.count_nonzero() == 0 for b in self.blocks.values())

    def equals(self, other: GridOperator) -> bool:
        """Exact entrywise equality, treating absent blocks as zero."""
        keys = set(self.blocks) | set(other.blocks)
        for k in keys:
            a, b = self.blocks.get(k), other.blocks.get(k)
            if a is None:
                a = sp.csr_matrix(b.shape)
            if b is None:
                b = sp.csr_matrix(a.shape)
            if (a != b).count_nonzero():
                return False
        return True

    def block_diagonal_only(self) -> bool:
        return all(r == c for (r, c) in self.blocks)

    def to_coo_text(self) -> str:
        """Coordinate list with a ``p n`` header line."""
        m = self.matrix.tocoo()
        lines = [f"{self.p} {self.grid.n}"]
        for r, c, v in zip(m.row, m.col, m.data):
            val = repr(complex(v)) if np.iscomplexobj(m.data) else repr(float(v))
            lines.append(f"{r} {c} {val}")
        return "\n".join(lines) + "\n"


def compose_blocks(a: GridOperator, b: GridOperator) -> GridOperator:
    out = {}
    for (r, k), x in a.blocks.items():
        for (k2, c), y in b.blocks.items():
            if k != k2:
                continue
            prod = (x @ y).tocsr()
            out[(r, c)] = (out[(r, c)] + prod).tocsr() if (r, c) in out else prod
    return GridOperator(a.p, a.grid, out)


def power(op: GridOperator, k: int) -> GridOperator:
    out = op
    for _ in range(k - 1):
        out = compose_blocks(out, op)
    return out


def number_of_block(p: int, r: int) -> int:
    """Parafermion number of block row ``r``."""
    return p - r


def _diag(values: np.ndarray) -> sp.csr_matrix:
    return sp.diags(np.asarray(values, dtype=float), 0, format="csr")


def build_Q(S: SuperpotentialSet, grid: Grid) -> GridOperator:
    D = d1(grid)
    blocks = {
        (r + 1, r): (-D + _diag(S.W[r].value(grid.x))).tocsr() for r in range(S.p)
    }
    return GridOperator(S.p, grid, blocks, "Q")


def build_Qdag(S: SuperpotentialSet, grid: Grid) -> GridOperator:
    """Raising charge built directly as ``d + W`` above the diagonal."""
    D = d1(grid)
    blocks = {
        (r, r + 1): (D + _diag(S.W[r].value(grid.x))).tocsr() for r in range(S.p)
    }
    return GridOperator(S.p, grid, blocks, "Qdag")


def hamiltonian_diagonals(S: SuperpotentialSet, x: np.ndarray) -> list[np.ndarray]:
    """Potential part of each diagonal block of ``H`` (kinetic term excluded)."""
    p = S.p
    common = sum(w.value(x) ** 2 for w in S.W)
    dW = [w.derivative(x) for w in S.W]
    out = []
    for row in DERIVATIVE_TABLE[p]:
        u = sum(c * dw for c, dw in zip(row, dW))
        out.append((common + u) / (2 * p))
    return out


def check_constraints(S: SuperpotentialSet, grid: Grid) -> None:
    if S.p < 2:
        return
    for res in residual_constraints(S, grid):
        if not res.valid:
            raise ConstraintViolation(
                f"{res.name} is not constant: max deviation {res.max_norm:.3g} around {res.constant:.6g}"
            )


def build_H(S: SuperpotentialSet, grid: Grid, check: bool = True) -> GridOperator:
    if check:
        check_constraints(S, grid)
    kinetic = -0.5 * d2(grid)
    blocks = {
        (r, r): (kinetic + _diag(v)).tocsr()
        for r, v in enumerate(hamiltonian_diagonals(S, grid.x))
    }
    return GridOperator(S.p, grid, blocks, "H")


def build_N(p: int, grid: Grid) -> GridOperator:
    eye = sp.identity(grid.n, format="csr")
    return GridOperator(p, grid, {(r, r): (number_of_block(p, r) * eye).tocsr() for r in range(p + 1)}, "N")


def number_commutator(op: GridOperator) -> GridOperator:
    """``[N, op]`` by block bookkeeping: block ``(r, c)`` scales by ``N_r - N_c``."""
    p = op.p
    out = {}
    for (r, c), b in op.blocks.items():
        shift = number_of_block(p, r) - number_of_block(p, c)
        if shift:
            out[(r, c)] = (shift * b).tocsr()
    return GridOperator(p, op.grid, out)


def build_hermitian_charges(Q: GridOperator) -> tuple[GridOperator, GridOperator]:
    """``Q1 = (Q^T + Q) / (2 sqrt3)``, ``Q2 = (Q^T - Q) / (2 sqrt3 i)``."""
    s = 2.0 * math.sqrt(3.0)
    Qd = Q.T
    Q1 = (Qd + Q).scale(1.0 / s)
    Q2 = (Qd - Q).scale(1.0 / (s * 1j))
    Q1.name, Q2.name = "Q1", "Q2"
    return Q1, Q2


@dataclass
class OperatorSet:
    """All numeric operators of one model on one grid."""

    S: SuperpotentialSet
    grid: Grid
    Q: GridOperator
    Qdag: GridOperator
    H: GridOperator
    N: GridOperator
    Q1: Optional[GridOperator] = None
    Q2: Optional[GridOperator] = None

    @property
    def p(self) -> int:
        return self.S.p

    def letters(self) -> dict:
        out = {"Q": self.Q, "Qd": self.Qdag, "H": self.H, "N": self.N}
        if self.Q1 is not None:
            out["Q1"], out["Q2"] = self.Q1, self.Q2
        return out


def build_operators(S: SuperpotentialSet, grid: Grid, check: bool = True) -> OperatorSet:
    Q = build_Q(S, grid)
    Qdag = Q.T
    Qdag.name = "Qdag"
    Q1, Q2 = build_hermitian_charges(Q)
    return OperatorSet(S, grid, Q, Qdag, build_H(S, grid, check=check), build_N(S.p, grid), Q1, Q2)


# ---------------------------------------------------------------------------
# symbolic twins


def build_Q_symbolic(polys: Sequence[Poly]) -> MatrixDiffOp:
    p = len(polys)
    d = DiffOp.d()
    return MatrixDiffOp.from_blocks(p + 1, {(r + 1, r): DiffOp.mul(polys[r]) - d for r in range(p)})


def build_Qdag_symbolic(polys: Sequence[Poly]) -> MatrixDiffOp:
    p = len(polys)
    d = DiffOp.d()
    return MatrixDiffOp.from_blocks(p + 1, {(r, r + 1): DiffOp.mul(polys[r]) + d for r in range(p)})


def build_H_symbolic(polys: Sequence[Poly]) -> MatrixDiffOp:
    p = len(polys)
    common = sum((w * w for w in polys), Poly())
    dW = [w.derivative() for w in polys]
    kinetic = DiffOp.d(2).scale(Fraction(-1, 2))
    diag = []
    for row in DERIVATIVE_TABLE[p]:
        u = sum((c * dw for c, dw in zip(row, dW)), Poly())
        diag.append(kinetic + DiffOp.mul((common + u) * Fraction(1, 2 * p)))
    return MatrixDiffOp.diagonal(diag)


def symbolic_letters(polys: Sequence[Poly]) -> dict:
    return {
        "Q": build_Q_symbolic(polys),
        "Qd": build_Qdag_symbolic(polys),
        "H": build_H_symbolic(polys),
    }
