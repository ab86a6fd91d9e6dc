"""Parasupersymmetry indices: kernel formula, family traces and the outcome table.

Index values are exact.  For order ``p`` they are integer combinations of
powers of ``w = exp(2 pi i / (p + 1))``: plain integers for ``p = 1``,
Eisenstein integers ``a + b w`` for ``p = 2`` and Gaussian integers for
``p = 3``.
"""

from __future__ import annotations

import cmath
import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import Grid
from .superpotential import SuperpotentialSet

LOG_DECAY = math.log(1e6)

PLUS, MINUS, NEITHER, INDETERMINATE = "plus", "minus", "neither", "indeterminate"


class IndexError_(RuntimeError):
    pass


class IndeterminateError(IndexError_):
    """A normalizability verdict could not be reached."""


class IndexWindowError(IndexError_):
    """Nongeneric families reach the top of the energy window."""


@dataclass(frozen=True)
class GaussianInt:
    re: int
    im: int

    def __add__(self, other) -> GaussianInt:
        other = as_gaussian(other)
        return GaussianInt(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self) -> GaussianInt:
        return GaussianInt(-self.re, -self.im)

    def __sub__(self, other) -> GaussianInt:
        return self + (-as_gaussian(other))

    def __mul__(self, other) -> GaussianInt:
        o = as_gaussian(other)
        return GaussianInt(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def to_json(self) -> dict:
        return {"re": self.re, "im": self.im}

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        return f"{self.re}{'+' if self.im > 0 else '-'}{abs(self.im)}i"


I_UNIT = GaussianInt(0, 1)


def as_gaussian(v) -> GaussianInt:
    if isinstance(v, GaussianInt):
        return v
    if isinstance(v, int):
        return GaussianInt(v, 0)
    raise TypeError(f"not a Gaussian integer: {v!r}")


@dataclass(frozen=True)
class EisensteinInt:
    """``a + b w`` with ``w = exp(2 pi i / 3)``."""

    a: int
    b: int

    def __add__(self, other) -> EisensteinInt:
        return EisensteinInt(self.a + other.a, self.b + other.b)

    def __neg__(self) -> EisensteinInt:
        return EisensteinInt(-self.a, -self.b)

    def __complex__(self) -> complex:
        return self.a + self.b * cmath.exp(2j * math.pi / 3)

    def to_json(self) -> dict:
        z = complex(self)
        return {"a": self.a, "b": self.b, "re": z.real, "im": z.imag}

    def __str__(self) -> str:
        return f"{self.a}{'+' if self.b >= 0 else '-'}{abs(self.b)}w"


def root_sum(counts: Sequence[int], p: int):
    """Exact value of ``sum_k counts[k] w^k`` with ``w`` a primitive ``(p+1)``-th root of unity."""
    c = list(counts) + [0] * (p + 1 - len(counts))
    if p == 1:
        return c[0] - c[1]
    if p == 2:
        # w^2 = -1 - w
        return EisensteinInt(c[0] - c[2], c[1] - c[2])
    if p == 3:
        return GaussianInt(c[0] - c[2], c[1] - c[3])
    raise ValueError(f"unsupported order {p}")


def _as_counts(value, p: int) -> tuple:
    if p == 1:
        return (value,)
    if p == 2:
        return (value.a, value.b)
    return (value.re, value.im)


# ---------------------------------------------------------------------------
# normalizability


@dataclass
class Verdict:
    verdict: str
    ends: dict

    def to_json(self) -> dict:
        return {"verdict": self.verdict, **{k: float(v) for k, v in self.ends.items()}}


def _diagnostic_interval(W, grid: Grid) -> tuple[float, float, float, float]:
    """Base interval ends and the ends of the interval three times as long."""
    c = 0.5 * (grid.x_min + grid.x_max)
    half = 1.5 * grid.length
    inner_lo, inner_hi, lo, hi = grid.x_min, grid.x_max, c - half, c + half
    dom = getattr(W, "domain", None)
    if dom is not None:
        lo, hi = max(lo, dom[0]), min(hi, dom[1])
        # no data beyond the table: test the outer quarter of what exists
        quarter = 0.25 * (hi - lo)
        inner_lo, inner_hi = max(inner_lo, lo + quarter), min(inner_hi, hi - quarter)
    return inner_lo, inner_hi, lo, hi


def classify_normalizability(W, grid: Grid, samples: int = 4001) -> Verdict:
    """Decide which of ``exp(+F)``, ``exp(-F)`` is square integrable, ``F = int^x W``.

    Each end is tested on the stretch from the grid's end out to the end of
    an interval three times as long.  If the envelope of the density
    ``exp(2F)`` (its maximum over the outer quarter of the stretch against
    the inner quarter) falls by a factor ``1e6``, ``exp(F)`` decays there;
    if the lower envelope grows by that factor, ``exp(-F)`` does.  Smaller net changes mean no decay,
    unless ``F`` swings by more than the threshold without a trend, which
    is reported as indeterminate.
    """
    inner_lo, inner_hi, lo, hi = _diagnostic_interval(W, grid)
    with np.errstate(over="ignore", invalid="ignore"):
        F_right = np.asarray(W.antiderivative(np.linspace(inner_hi, hi, samples)), dtype=float)
        F_left = np.asarray(W.antiderivative(np.linspace(inner_lo, lo, samples)), dtype=float)
    ends = {}
    trend = {}
    for name, F in (("left", F_left), ("right", F_right)):
        F = np.nan_to_num(F[~np.isnan(F)], posinf=np.finfo(float).max, neginf=-np.finfo(float).max)
        q = max(len(F) // 4, 1)
        near, far = F[:q], F[-q:]
        with np.errstate(over="ignore", invalid="ignore"):
            fall = 2.0 * (float(far.max()) - float(near.max()))
            rise = 2.0 * (float(far.min()) - float(near.min()))
            swing = 2.0 * (float(F.max()) - float(F.min()))
        ends[f"{name}_fall"] = fall
        ends[f"{name}_rise"] = rise
        if fall <= -LOG_DECAY:
            trend[name] = "down"
        elif rise >= LOG_DECAY:
            trend[name] = "up"
        elif swing >= LOG_DECAY:
            trend[name] = "oscillating"
        else:
            trend[name] = "flat"
    if "oscillating" in trend.values():
        return Verdict(INDETERMINATE, ends)
    if trend["left"] == trend["right"] == "down":
        return Verdict(PLUS, ends)
    if trend["left"] == trend["right"] == "up":
        return Verdict(MINUS, ends)
    return Verdict(NEITHER, ends)


# ---------------------------------------------------------------------------
# kernels and the analytic index


@dataclass(frozen=True)
class KernelProfile:
    """Kernel dimensions of the restricted charges.

    ``ker_Q[j - 1]`` is ``dim ker Q`` on stratum ``j`` (``j = 1..p``);
    ``ker_Qd[j]`` is ``dim ker Qd`` on stratum ``j`` (``j = 0..p-1``).
    """

    p: int
    ker_Q: tuple
    ker_Qd: tuple
    reliable: bool = True

    def __post_init__(self):
        if len(self.ker_Q) != self.p or len(self.ker_Qd) != self.p:
            raise ValueError("profile needs p entries for each of Q and Qd")
        if any(v not in (0, 1) for v in self.ker_Q + self.ker_Qd):
            raise ValueError("kernel dimensions must be 0 or 1")
        for i in range(1, self.p + 1):
            plus, minus = self.pair(i)
            if plus and minus:
                raise ValueError(f"superpotential {i} cannot have both zero modes normalizable")

    def pair(self, i: int) -> tuple[int, int]:
        """(plus, minus) kernel entries fed by superpotential ``i``."""
        top = self.p - i + 1
        return self.ker_Q[top - 1], self.ker_Qd[top - 1]

    def to_json(self) -> dict:
        out = {f"ker_Q{j}": self.ker_Q[j - 1] for j in range(1, self.p + 1)}
        out.update({f"ker_Qd{j}": self.ker_Qd[j] for j in range(self.p)})
        return out

    def flipped(self) -> KernelProfile:
        return profile_from_verdicts(
            [ {PLUS: MINUS, MINUS: PLUS}.get(v, v) for v in self.verdicts() ], self.p
        )

    def verdicts(self) -> list:
        out = []
        for i in range(1, self.p + 1):
            plus, minus = self.pair(i)
            out.append(PLUS if plus else MINUS if minus else NEITHER)
        return out


def profile_from_verdicts(verdicts: Sequence[str], p: Optional[int] = None) -> KernelProfile:
    """Superpotential ``i`` links strata ``p-i+1`` and ``p-i``: ``plus`` feeds
    ``ker Q`` on the upper one, ``minus`` feeds ``ker Qd`` on the lower one."""
    p = len(verdicts) if p is None else p
    ker_Q = [0] * p
    ker_Qd = [0] * p
    reliable = True
    for i, v in enumerate(verdicts, start=1):
        top = p - i + 1
        if v == PLUS:
            ker_Q[top - 1] = 1
        elif v == MINUS:
            ker_Qd[top - 1] = 1
        elif v == INDETERMINATE:
            reliable = False
    return KernelProfile(p, tuple(ker_Q), tuple(ker_Qd), reliable)


def kernel_profile(S: SuperpotentialSet, grid: Grid) -> tuple[KernelProfile, list]:
    verdicts = [classify_normalizability(w, grid) for w in S.W]
    return profile_from_verdicts([v.verdict for v in verdicts], S.p), verdicts


def analytic_index(profile: KernelProfile):
    """Alternating kernel count weighted by partial sums of roots of unity.

    A kernel of ``Qd`` on stratum ``j`` contributes ``1 + w + ... + w^j``; a
    kernel of ``Q`` on stratum ``j`` contributes ``-(1 + w + ... + w^(j-1))``.
    """
    p = profile.p
    counts = [0] * (p + 1)
    for j in range(p):
        for k in range(j + 1):
            counts[k] += profile.ker_Qd[j]
    for j in range(1, p + 1):
        for k in range(j):
            counts[k] -= profile.ker_Q[j - 1]
    return root_sum(counts, p)


def analytic_index_formula_p3(profile: KernelProfile) -> GaussianInt:
    """The order-3 formula written out term by term (independent check of :func:`analytic_index`)."""
    kq, kd = profile.ker_Q, profile.ker_Qd
    one_i = GaussianInt(1, 1)
    return (
        GaussianInt(kd[0], 0)
        + one_i * kd[1]
        + I_UNIT * kd[2]
        - GaussianInt(kq[0], 0)
        - one_i * kq[1]
        - I_UNIT * kq[2]
    )


# ---------------------------------------------------------------------------
# trace over families


def trace_index(families: Iterable, E_cut: float, p: int, E_min: Optional[float] = None, top_fraction: float = 0.3):
    """``Tr w^N`` summed over nongeneric families; generic ones contribute zero.

    Refuses (``IndexWindowError``) when a nongeneric family sits in the top
    ``top_fraction`` of the energy window, since more may lie above it.
    """
    fams = list(families)
    if E_min is None:
        E_min = min((f.energy for f in fams), default=0.0)
    threshold = E_min + (1 - top_fraction) * (E_cut - E_min)
    counts = [0] * (p + 1)
    for f in fams:
        if f.generic:
            continue
        if f.energy > threshold:
            raise IndexWindowError(
                f"nongeneric family at E={f.energy:.6g} lies in the top of the window (E_cut={E_cut:g}); enlarge it"
            )
        for s in f.strata:
            counts[s] += 1
    return root_sum(counts, p)


# ---------------------------------------------------------------------------
# the outcome table


@dataclass
class OutcomeTable:
    rows: list

    @property
    def values(self) -> set:
        return {v for _, _, v in self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["W1", "W2", "W3", "ker_Q1", "ker_Q2", "ker_Q3", "ker_Qd0", "ker_Qd1", "ker_Qd2", "re", "im"])
        for verdicts, prof, v in self.rows:
            w.writerow(list(verdicts) + list(prof.ker_Q) + list(prof.ker_Qd) + [v.re, v.im])
        w.writerow([])
        w.writerow(["distinct", len(self.values)])
        return buf.getvalue()


def enumerate_outcomes() -> OutcomeTable:
    rows = []
    for verdicts in itertools.product((PLUS, MINUS, NEITHER), repeat=3):
        prof = profile_from_verdicts(verdicts, 3)
        rows.append((verdicts, prof, analytic_index(prof)))
    return OutcomeTable(rows)


# ---------------------------------------------------------------------------
# lower orders


def index_p1(S: SuperpotentialSet, grid: Grid) -> int:
    if S.p != 1:
        raise ValueError("index_p1 needs a p = 1 model")
    prof, verdicts = kernel_profile(S, grid)
    if not prof.reliable:
        raise IndeterminateError("normalizability of W is indeterminate")
    return analytic_index(prof)


def index_p2(S: SuperpotentialSet, grid: Grid) -> EisensteinInt:
    if S.p != 2:
        raise ValueError("index_p2 needs a p = 2 model")
    prof, verdicts = kernel_profile(S, grid)
    if not prof.reliable:
        raise IndeterminateError("normalizability of a superpotential is indeterminate")
    return analytic_index(prof)


def index_json(value) -> dict:
    if isinstance(value, int):
        return {"re": value, "im": 0}
    return value.to_json()
