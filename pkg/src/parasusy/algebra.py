"""Relation catalogues and their symbolic (exact) and numeric (convergence) checks.

A relation is ``sum lhs == sum rhs`` where each side is a list of
``(coefficient, word)`` pairs and a word is a tuple of letters drawn from
``Q``, ``Qd`` (the adjoint), ``H``, ``Q1`` and ``Q2``.  Words act right to
left, as operator products do.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import Grid, convergence_order
from .operators import OperatorSet, build_operators, symbolic_letters
from .superpotential import SuperpotentialError, SuperpotentialSet
from .weyl import MatrixDiffOp, is_zero, linear_combination, matrix_compose

CHARGE_LETTERS = {"Q", "Qd", "Q1", "Q2"}
ORDER_WINDOW = (1.7, 2.3)
#: residuals below this are treated as exact (stencil identities, nilpotency)
EXACT_FLOOR = 1e-9


def _word(text: str) -> tuple[str, ...]:
    return tuple(text.split())


@dataclass(frozen=True)
class Relation:
    name: str
    lhs: tuple
    rhs: tuple = ()
    description: str = ""

    @classmethod
    def of(cls, name: str, lhs, rhs=(), description: str = "") -> Relation:
        norm = lambda side: tuple((c, _word(w) if isinstance(w, str) else tuple(w)) for c, w in side)
        return cls(name, norm(lhs), norm(rhs), description)

    def terms(self):
        """``lhs - rhs`` as one list of signed monomials."""
        return list(self.lhs) + [(-c, w) for c, w in self.rhs]

    def letters(self) -> set:
        return {l for _, w in self.terms() for l in w}

    def weight(self, word) -> int:
        return sum(2 if l == "H" else 1 for l in word)

    def is_homogeneous(self) -> bool:
        """Every monomial has the same charge weight when ``H`` counts as two charges."""
        ws = {self.weight(w) for _, w in self.terms()}
        return len(ws) <= 1


@dataclass(frozen=True)
class SigmaWord:
    """All distinct orderings of ``i`` copies of ``Q1`` and ``j`` copies of ``Q2``."""

    i: int
    j: int

    @property
    def monomials(self) -> list[tuple[str, ...]]:
        n = self.i + self.j
        out = []
        for pos in itertools.combinations(range(n), self.i):
            out.append(tuple("Q1" if k in pos else "Q2" for k in range(n)))
        return out

    def terms(self, coeff=1, suffix: tuple = ()) -> list:
        return [(coeff, m + suffix) for m in self.monomials]


ADJOINT_LETTER = {"Q": "Qd", "Qd": "Q", "H": "H", "N": "N", "Q1": "Q1", "Q2": "Q2"}


def adjoint_relation(rel: Relation) -> Relation:
    """Formal adjoint: words reversed, ``Q <-> Qd``, coefficients conjugated."""

    def side(terms):
        return tuple((complex(c).conjugate() if isinstance(c, complex) else c, tuple(ADJOINT_LETTER[l] for l in reversed(w))) for c, w in terms)

    return Relation(rel.name + "_adjoint", side(rel.lhs), side(rel.rhs), rel.description)


def relations_p1() -> list[Relation]:
    return [
        Relation.of("nilpotent_Q", [(1, "Q Q")]),
        Relation.of("nilpotent_Qd", [(1, "Qd Qd")]),
        Relation.of("commute_Q_H", [(1, "Q H"), (-1, "H Q")]),
        Relation.of("commute_Qd_H", [(1, "Qd H"), (-1, "H Qd")]),
        Relation.of("anticommutator", [(1, "Q Qd"), (1, "Qd Q")], [(2, "H")]),
    ]


def relations_p2() -> list[Relation]:
    return [
        Relation.of("nilpotent_Q", [(1, "Q Q Q")]),
        Relation.of("nilpotent_Qd", [(1, "Qd Qd Qd")]),
        Relation.of("commute_Q_H", [(1, "Q H"), (-1, "H Q")]),
        Relation.of("commute_Qd_H", [(1, "Qd H"), (-1, "H Qd")]),
        Relation.of("trilinear_lowering", [(1, "Q Q Qd"), (1, "Q Qd Q"), (1, "Qd Q Q")], [(4, "Q H")]),
        Relation.of("trilinear_raising", [(1, "Qd Qd Q"), (1, "Qd Q Qd"), (1, "Q Qd Qd")], [(4, "Qd H")]),
    ]


def relations_p3() -> list[Relation]:
    return [
        Relation.of("nilpotent_Q", [(1, "Q Q Q Q")]),
        Relation.of("nilpotent_Qd", [(1, "Qd Qd Qd Qd")]),
        Relation.of("commute_Q_H", [(1, "Q H"), (-1, "H Q")]),
        Relation.of("commute_Qd_H", [(1, "Qd H"), (-1, "H Qd")]),
        Relation.of(
            "quartic_lowering",
            [(1, "Q Q Q Qd"), (1, "Q Q Qd Q"), (1, "Q Qd Q Q"), (1, "Qd Q Q Q")],
            [(6, "Q Q H")],
        ),
        Relation.of("quartic_mixed", [(1, "Q Qd Qd Q")], [(1, "Qd Q Q Qd")]),
        Relation.of(
            "quartic_raising",
            [(1, "Qd Qd Qd Q"), (1, "Qd Qd Q Qd"), (1, "Qd Q Qd Qd"), (1, "Q Qd Qd Qd")],
            [(6, "Qd Qd H")],
        ),
    ]


def relations_for(p: int) -> list[Relation]:
    return {1: relations_p1, 2: relations_p2, 3: relations_p3}[p]()


def commuting_set_relations() -> list[Relation]:
    """Pairwise commutators of the quadratic and quartic ladder products (must vanish)."""
    ops = {
        "QQd": "Q Qd",
        "QdQ": "Qd Q",
        "Q2Qd2": "Q Q Qd Qd",
        "Qd2Q2": "Qd Qd Q Q",
        "H": "H",
    }
    out = []
    for a, b in itertools.combinations(ops, 2):
        wa, wb = _word(ops[a]), _word(ops[b])
        out.append(Relation(f"commute_{a}_{b}", ((1, wa + wb), (-1, wb + wa)), ()))
    return out


def hermitian_relations() -> list[Relation]:
    S = SigmaWord
    H = ("H",)
    return [
        Relation.of("herm_commute_Q1_H", [(1, "Q1 H"), (-1, "H Q1")]),
        Relation.of("herm_commute_Q2_H", [(1, "Q2 H"), (-1, "H Q2")]),
        Relation("sigma13_eq_sigma31", tuple(S(1, 3).terms() + S(3, 1).terms(-1)), ()),
        Relation("sigma40_plus_sigma04_eq_sigma22", tuple(S(4, 0).terms() + S(0, 4).terms()), tuple(S(2, 2).terms())),
        Relation("sigma13_plus_sigma31_eq_sigma11_H", tuple(S(1, 3).terms() + S(3, 1).terms()), tuple(S(1, 1).terms(1, H))),
        Relation.of(
            "quartic_difference",
            [(2, "Q1 Q1 Q1 Q1"), (-2, "Q2 Q2 Q2 Q2")],
            [(1, "Q1 Q1 H"), (-1, "Q2 Q2 H")],
        ),
        Relation.of(
            "mixed_cubic_symmetry",
            [(1, "Q1 Q1 Q1 Q2"), (1, "Q2 Q2 Q1 Q2"), (1, "Q2 Q1 Q2 Q2"), (1, "Q2 Q1 Q1 Q1")],
            [(1, "Q2 Q2 Q2 Q1"), (1, "Q1 Q1 Q2 Q1"), (1, "Q1 Q2 Q1 Q1"), (1, "Q1 Q2 Q2 Q2")],
        ),
    ]


# ---------------------------------------------------------------------------
# symbolic backend


@dataclass
class SymbolicVerdict:
    relation: str
    passed: bool
    first_nonzero: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "backend": "symbolic",
            "residual": 0.0 if self.passed else None,
            "order": None,
            "pass": self.passed,
            "detail": self.first_nonzero,
        }


def relation_operator(rel: Relation, letters: dict) -> MatrixDiffOp:
    dim = next(iter(letters.values())).dim
    terms = []
    for c, word in rel.terms():
        if isinstance(c, complex):
            raise SuperpotentialError(f"{rel.name}: complex coefficients have no symbolic backend")
        op = letters[word[0]]
        for l in word[1:]:
            op = matrix_compose(op, letters[l])
        terms.append((c, op))
    return linear_combination(terms, dim)


def check_symbolic(rel: Relation, S: SuperpotentialSet) -> SymbolicVerdict:
    """Expand ``lhs - rhs`` exactly; passes iff it is the zero operator."""
    unknown = rel.letters() - {"Q", "Qd", "H"}
    if unknown:
        raise SuperpotentialError(f"{rel.name}: letters {sorted(unknown)} have no symbolic form")
    letters = symbolic_letters(S.polys())
    diff = relation_operator(rel, letters)
    if is_zero(diff):
        return SymbolicVerdict(rel.name, True)
    i, j, e = diff.nonzero_entries()[0]
    return SymbolicVerdict(rel.name, False, f"[{i},{j}] {e}")


def symbolic_suite(S: SuperpotentialSet) -> list[SymbolicVerdict]:
    return [check_symbolic(r, S) for r in relations_for(S.p)]


# ---------------------------------------------------------------------------
# numeric backend


def smooth_test_vectors(grid: Grid, p: int, trials: int, seed: int, n_modes: int = 6, complex_: bool = False) -> list[np.ndarray]:
    """Smooth seeded fields, the same continuous functions on every grid.

    Each component is a Gaussian-random combination of the lowest ``n_modes``
    sine modes of the interval, multiplied by a flat-topped window that is
    negligible outside the central 80% of the interval.
    """
    rng = np.random.default_rng(seed)
    x = grid.x
    L = grid.length
    c = 0.5 * (grid.x_min + grid.x_max)
    u = (x - c) / (0.4 * L)
    window = np.exp(-36.0 * u**8)
    k = np.arange(1, n_modes + 1)
    modes = np.sin(np.outer(k, np.pi * (x - grid.x_min) / L))
    out = []
    for _ in range(trials):
        comps = []
        for _ in range(p + 1):
            a = rng.standard_normal(n_modes)
            if complex_:
                a = a + 1j * rng.standard_normal(n_modes)
            comps.append(window * (a @ modes))
        out.append(np.concatenate(comps))
    return out


def apply_relation(rel: Relation, letters: dict, v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape, dtype=complex if np.iscomplexobj(v) or any(
        letters[l].is_complex for l in rel.letters()) else float)
    cache: dict = {}
    for c, word in rel.terms():
        # share suffix products between monomials
        w = v
        for k in range(len(word) - 1, -1, -1):
            key = word[k:]
            if key in cache:
                w = cache[key]
            else:
                w = letters[word[k]].apply(w)
                cache[key] = w
        out = out + c * w
    return out


def relation_residual(rel: Relation, ops: OperatorSet, vectors: Sequence[np.ndarray]) -> float:
    letters = ops.letters()
    g = ops.grid
    worst = 0.0
    for v in vectors:
        r = apply_relation(rel, letters, v)
        worst = max(worst, g.norm(r) / g.norm(v))
    return worst


@dataclass
class NumericVerdict:
    relation: str
    hs: list
    residuals: list
    order: Optional[float]
    passed: bool
    backend: str = "numeric"

    @property
    def residual(self) -> float:
        return self.residuals[-1]

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "backend": self.backend,
            "residual": float(self.residual),
            "order": None if self.order is None else float(self.order),
            "pass": bool(self.passed),
            "residuals": [float(r) for r in self.residuals],
            "h": [float(h) for h in self.hs],
        }


def judge(residuals: Sequence[float], order: Optional[float], scale: float = 1.0) -> bool:
    if residuals[-1] <= EXACT_FLOOR * scale:
        return True
    return order is not None and ORDER_WINDOW[0] <= order <= ORDER_WINDOW[1]


def refinement_grids(grid: Grid, levels: int = 3) -> list[Grid]:
    return [Grid(grid.x_min, grid.x_max, grid.n * 2**k) for k in range(levels)]


def coarsening_grids(grid: Grid, levels: int = 3) -> list[Grid]:
    """``n / 2^k`` down from the given grid, coarsest first."""
    return [Grid(grid.x_min, grid.x_max, grid.n // 2**k) for k in range(levels - 1, -1, -1)]


def check_numeric(
    rel: Relation,
    S: SuperpotentialSet,
    grids: Sequence[Grid],
    trials: int = 4,
    seed: int = 0,
    ops_cache: Optional[dict] = None,
) -> NumericVerdict:
    """Max over seeded test vectors of ``|(lhs - rhs) v| / |v|`` on each grid, plus the fitted order."""
    return numeric_suite([rel], S, grids, trials, seed, ops_cache)[0]


def numeric_suite(
    rels: Sequence[Relation],
    S: SuperpotentialSet,
    grids: Sequence[Grid],
    trials: int = 4,
    seed: int = 0,
    ops_cache: Optional[dict] = None,
) -> list[NumericVerdict]:
    ops_cache = {} if ops_cache is None else ops_cache
    table = {r.name: [] for r in rels}
    for g in grids:
        ops = ops_cache.get(g)
        if ops is None:
            ops = ops_cache[g] = build_operators(S, g, check=False)
        complex_ = any(l in ("Q1", "Q2") for r in rels for l in r.letters())
        vecs = smooth_test_vectors(g, S.p, trials, seed, complex_=complex_)
        for r in rels:
            table[r.name].append(relation_residual(r, ops, vecs))
    hs = [g.h for g in grids]
    out = []
    for r in rels:
        res = table[r.name]
        order = None
        if len(grids) > 1 and all(x > 0 for x in res):
            order = convergence_order(hs, res)
        out.append(NumericVerdict(r.name, hs, res, order, judge(res, order)))
    return out


@dataclass
class HermitianReport:
    hermitian: list
    ladder: list
    equivalent: bool

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.hermitian) and self.equivalent

    def to_json(self) -> dict:
        return {
            "hermitian": [v.to_json() for v in self.hermitian],
            "ladder": [v.to_json() for v in self.ladder],
            "equivalent": self.equivalent,
        }


def check_hermitian_form(S: SuperpotentialSet, grids: Sequence[Grid], trials: int = 4, seed: int = 0) -> HermitianReport:
    """Hermitian-charge relations, cross-checked against the ladder-form relations.

    The two sets are equivalent: both must pass, or both must fail.
    """
    if S.p != 3:
        raise SuperpotentialError("the hermitian form is defined for p = 3")
    cache: dict = {}
    herm = numeric_suite(hermitian_relations(), S, grids, trials, seed, cache)
    ladder = numeric_suite(relations_p3()[2:], S, grids, trials, seed, cache)
    ok_h = all(v.passed for v in herm)
    ok_l = all(v.passed for v in ladder)
    return HermitianReport(herm, ladder, ok_h == ok_l)


# ---------------------------------------------------------------------------
# negative energy


@dataclass
class Certificate:
    q2: float
    qd2: float
    eigen_q1: float
    c: float
    passed: bool

    def to_json(self) -> dict:
        return {"Q2_psi": self.q2, "Qd2_psi": self.qd2, "Q_plus_Qd_residual": self.eigen_q1, "c": self.c, "pass": self.passed}


def negative_energy_certificate(psi: np.ndarray, ops: OperatorSet, tol: float = 1e-3) -> Certificate:
    """Residuals of the three conditions that allow a state to carry negative energy.

    ``|Q^2 psi|``, ``|Qd^2 psi|`` and ``min_c |(Q + Qd) psi - c psi|``, all
    relative to ``|psi|``.  ``psi`` is a full ``(p+1) n`` vector.
    """
    g = ops.grid
    nrm = g.norm(psi)
    Qp = ops.Q.apply(psi)
    Qdp = ops.Qdag.apply(psi)
    q2 = g.norm(ops.Q.apply(Qp)) / nrm
    qd2 = g.norm(ops.Qdag.apply(Qdp)) / nrm
    s = Qp + Qdp
    c = float(np.real(g.inner(psi, s) / g.inner(psi, psi)))
    e = g.norm(s - c * psi) / nrm
    return Certificate(q2, qd2, e, c, max(q2, qd2, e) <= tol)
