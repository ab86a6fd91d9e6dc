"""Block spectra, degeneracy groups and ladder families.

Every diagonal block of ``H`` is a symmetric tridiagonal matrix, so each is
solved independently.  Families are grown from an anchor eigenvector by
walking down with ``Q`` and back up with ``Qd``; a ladder step counts as
annihilated when its norm falls below ``tol_null``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .grid import Grid
from .operators import GridOperator, OperatorSet, number_of_block

log = logging.getLogger(__name__)

EIG_RESIDUAL_TOL = 1e-8
BOUNDARY_DECAY = 1e-8
MATCH_MIN = 0.9


class SpectralError(RuntimeError):
    pass


class FamilyError(SpectralError):
    """A ladder image is not an eigenvector of its block at the anchor energy."""


class DecompositionError(SpectralError):
    pass


@dataclass
class Level:
    energy: float
    block: int
    index: int
    vector: np.ndarray
    stratum: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.block, self.index)


@dataclass
class Spectrum:
    p: int
    grid: Grid
    levels: list
    tol_group: float
    diagnostics: list = field(default_factory=list)

    def block_levels(self, r: int) -> list:
        return [l for l in self.levels if l.block == r]

    def embed(self, level: Level) -> np.ndarray:
        """Full ``(p+1) n`` vector of a block eigenvector."""
        n = self.grid.n
        out = np.zeros((self.p + 1) * n)
        out[level.block * n:(level.block + 1) * n] = level.vector
        return out

    def energies(self, r: Optional[int] = None) -> np.ndarray:
        ls = self.levels if r is None else self.block_levels(r)
        return np.array([l.energy for l in ls])


def default_tol_group(grid: Grid) -> float:
    return 50.0 * grid.h**2


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def eigensolve_blocks(
    H: GridOperator,
    k: Optional[int] = None,
    E_cut: Optional[float] = None,
    tol_group: Optional[float] = None,
) -> Spectrum:
    """Lowest ``k`` eigenpairs of every block, or all eigenpairs up to ``E_cut``."""
    if k is None and E_cut is None:
        raise ValueError("give k or E_cut")
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    grid = H.grid
    tol_group = default_tol_group(grid) if tol_group is None else tol_group
    levels, diags = [], []
    for r in range(H.p + 1):
        B = H.block(r, r)
        if not H.block_diagonal_only():
            raise SpectralError("H has off-diagonal blocks")
        dia = B.diagonal().astype(float)
        off = B.diagonal(1).astype(float)
        if not np.array_equal(off, B.diagonal(-1)):
            raise SpectralError(f"block {r} is not symmetric")
        if k is not None:
            w, V = eigh_tridiagonal(dia, off, select="i", select_range=(0, min(k, grid.n) - 1))
        else:
            lo = float(dia.min() - 2 * np.abs(off).max() - 1.0)
            w, V = eigh_tridiagonal(dia, off, select="v", select_range=(lo, E_cut))
        for j in range(w.size):
            v = V[:, j]
            res = np.linalg.norm(B @ v - w[j] * v)
            if res > EIG_RESIDUAL_TOL:
                raise SpectralError(f"eigenpair {j} of block {r} not converged (residual {res:.3g})")
            edge = max(abs(v[0]), abs(v[-1])) / np.abs(v).max()
            if edge > BOUNDARY_DECAY:
                diags.append(f"block {r} level {j} (E={w[j]:.6g}) is {edge:.2g} at the boundary")
            v = _fix_sign(v) / np.sqrt(grid.h)
            levels.append(Level(float(w[j]), r, j, v, number_of_block(H.p, r)))
    for msg in diags:
        log.debug(msg)
    levels.sort(key=lambda l: (l.energy, -l.block))
    return Spectrum(H.p, grid, levels, tol_group, diags)


@dataclass
class EnergyGroup:
    energy: float
    levels: list

    @property
    def multiplicity(self) -> int:
        return len(self.levels)


def group_degeneracies(spec: Spectrum) -> list:
    """Cluster levels of all blocks whose energies differ by at most ``tol_group``."""
    ls = sorted(spec.levels, key=lambda l: l.energy)
    groups: list = []
    for l in ls:
        if groups and l.energy - groups[-1].levels[-1].energy <= spec.tol_group:
            groups[-1].levels.append(l)
        else:
            groups.append(EnergyGroup(l.energy, [l]))
    for g in groups:
        g.energy = float(np.mean([l.energy for l in g.levels]))
    for a, b in zip(groups, groups[1:]):
        if b.levels[0].energy - a.levels[-1].energy < 3 * spec.tol_group:
            msg = f"ambiguous clustering near E={a.energy:.6g} and E={b.energy:.6g}"
            if msg not in spec.diagnostics:
                spec.diagnostics.append(msg)
                log.warning(msg)
    return groups


def resolve_degeneracies(spec: Spectrum, ops: OperatorSet) -> Spectrum:
    """Rotate accidentally degenerate levels within one block to diagonalize ``Qd Q``."""
    g = spec.grid
    for group in group_degeneracies(spec):
        by_block: dict = {}
        for l in group.levels:
            by_block.setdefault(l.block, []).append(l)
        for r, ls in by_block.items():
            if len(ls) < 2:
                continue
            V = np.column_stack([l.vector for l in ls])
            QdQ = _restricted_QdQ(ops, r)
            M = g.h * V.T @ (QdQ @ V)
            _, R = np.linalg.eigh(0.5 * (M + M.T))
            W = V @ R
            for j, l in enumerate(ls):
                l.vector = _fix_sign(W[:, j])
    return spec


def _restricted_QdQ(ops: OperatorSet, r: int):
    down = ops.Q.block(r + 1, r)
    if down is None:
        return np.zeros((ops.grid.n, ops.grid.n))
    return (ops.Qdag.block(r, r + 1) @ down).toarray()


# ---------------------------------------------------------------------------
# families


def family_label(down: int, up: int) -> str:
    def term(k, letter):
        if k == 0:
            return "psi"
        return f"{letter} psi" if k == 1 else f"{letter}^{k} psi"

    parts = [term(k, "Q") for k in range(down, 0, -1)] + ["psi"] + [term(k, "Qd") for k in range(1, up + 1)]
    return "{" + ", ".join(parts) + "}"


def family_forms(p: int = 3) -> list:
    """All basis patterns ``(down, up)`` with ``down + up <= p``."""
    return [(a, total - a) for total in range(p, -1, -1) for a in range(total + 1)]


@dataclass
class Member:
    stratum: int
    block: int
    vector: np.ndarray
    step_norm: float


@dataclass
class Family:
    anchor: Level
    members: list
    down: int
    up: int
    p: int
    energy: float
    levels: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.members)

    @property
    def generic(self) -> bool:
        return self.dim == self.p + 1

    @property
    def form(self) -> tuple[int, int]:
        return (self.down, self.up)

    @property
    def label(self) -> str:
        return family_label(self.down, self.up)

    @property
    def strata(self) -> list:
        return [m.stratum for m in self.members]


def default_tol_null(ops: OperatorSet) -> float:
    """``1e-6`` times a bound on ``|Qd|``, floored at ``10 h^2``.

    Annihilated ladder steps of discrete eigenvectors are O(h^2), not O(eps),
    and the floor keeps them below the threshold on coarse grids.
    """
    g = ops.grid
    raise_norm = 1.0 / g.h + max(float(np.max(np.abs(w.value(g.x)))) for w in ops.S.W)
    return max(1e-6 * raise_norm, 10.0 * g.h**2)


def _ladder_step(ops: OperatorSet, vec: np.ndarray, block: int, lower: bool):
    if lower:
        B = ops.Q.block(block + 1, block)
        return None if B is None else (B @ vec, block + 1)
    B = ops.Qdag.block(block - 1, block)
    return None if B is None else (B @ vec, block - 1)


def _check_eigen(ops: OperatorSet, block: int, vec: np.ndarray, energy: float, tol: float):
    g = ops.grid
    Hb = ops.H.block(block, block)
    e = float(g.inner(vec, Hb @ vec).real)
    if abs(e - energy) > tol:
        raise FamilyError(
            f"ladder image in stratum {number_of_block(ops.p, block)} has energy {e:.6g}, anchor {energy:.6g}"
        )


def build_family(
    level: Level,
    ops: OperatorSet,
    tol_null: Optional[float] = None,
    tol_energy: Optional[float] = None,
) -> Family:
    """Family of ``level``: walk down with ``Q``, then up with ``Qd``, normalizing each step."""
    g = ops.grid
    p = ops.p
    tol_null = default_tol_null(ops) if tol_null is None else tol_null
    tol_energy = default_tol_group(g) if tol_energy is None else tol_energy
    psi = level.vector / g.norm(level.vector)

    vec, block, down = psi, level.block, 0
    while True:
        step = _ladder_step(ops, vec, block, lower=True)
        if step is None:
            break
        w, nb = step
        nrm = g.norm(w)
        if nrm <= tol_null:
            break
        vec, block, down = w / nrm, nb, down + 1
        _check_eigen(ops, block, vec, level.energy, tol_energy)

    members = [Member(number_of_block(p, block), block, vec, 1.0)]
    while True:
        step = _ladder_step(ops, vec, block, lower=False)
        if step is None:
            break
        w, nb = step
        nrm = g.norm(w)
        if nrm <= tol_null:
            break
        vec, block = w / nrm, nb
        _check_eigen(ops, block, vec, level.energy, tol_energy)
        members.append(Member(number_of_block(p, block), block, vec, nrm))

    up = len(members) - 1 - down
    if up < 0:
        raise FamilyError(f"ladder from stratum {level.stratum} did not return to the anchor")
    back = members[down]
    if abs(g.inner(back.vector, psi)) < MATCH_MIN:
        raise FamilyError("ladder round trip does not reproduce the anchor")
    return Family(level, members, down, up, p, level.energy)


@dataclass
class Decomposition:
    families: list
    groups: list
    E_cut: float
    problems: list
    max_overlap: float

    @property
    def passed(self) -> bool:
        return not self.problems

    @property
    def dims(self) -> list:
        return [f.dim for f in self.families]

    def raise_for_problems(self):
        if self.problems:
            raise DecompositionError("; ".join(self.problems))


def decompose(
    spec: Spectrum,
    ops: OperatorSet,
    E_cut: float,
    tol_null: Optional[float] = None,
    tol_overlap: float = 1e-3,
) -> Decomposition:
    """Cover every level up to ``E_cut`` by families and check the cover is a direct sum."""
    g = spec.grid
    groups = [gr for gr in group_degeneracies(spec) if gr.energy <= E_cut]
    covered: dict = {}
    families: list = []
    problems: list = []
    for gr in groups:
        while True:
            free = [l for l in gr.levels if l.key not in covered]
            if not free:
                break
            anchor = max(free, key=lambda l: l.block)  # lowest parafermion number
            try:
                fam = build_family(anchor, ops, tol_null, spec.tol_group)
            except FamilyError as exc:
                problems.append(f"E={gr.energy:.6g}: {exc}")
                covered[anchor.key] = -1
                continue
            fid = len(families)
            for m in fam.members:
                cands = [l for l in gr.levels if l.block == m.block]
                if not cands:
                    problems.append(f"E={gr.energy:.6g}: member in stratum {m.stratum} has no computed level")
                    continue
                ovl = [abs(g.inner(l.vector, m.vector)) for l in cands]
                best = int(np.argmax(ovl))
                if ovl[best] < MATCH_MIN:
                    problems.append(f"E={gr.energy:.6g}: member in stratum {m.stratum} matches no level")
                    continue
                lv = cands[best]
                if lv.key in covered:
                    problems.append(f"E={gr.energy:.6g}: level {lv.key} covered twice")
                    continue
                covered[lv.key] = fid
                fam.levels.append(lv)
            families.append(fam)
    for gr in groups:
        for l in gr.levels:
            if l.key not in covered:
                problems.append(f"level {l.key} at E={l.energy:.6g} not covered")
    worst = 0.0
    for i, a in enumerate(families):
        for b in families[i + 1:]:
            for ma in a.members:
                for mb in b.members:
                    if ma.block == mb.block:
                        worst = max(worst, abs(g.inner(ma.vector, mb.vector)))
    if worst > tol_overlap:
        problems.append(f"families overlap by {worst:.3g}")
    return Decomposition(families, groups, E_cut, problems, worst)


def verify_decomposition(spec: Spectrum, ops: OperatorSet, E_cut: float, **kw) -> Decomposition:
    dec = decompose(spec, ops, E_cut, **kw)
    dec.raise_for_problems()
    return dec


# ---------------------------------------------------------------------------
# exports and window diagnostics


def spectrum_csv(spec: Spectrum, dec: Optional[Decomposition] = None) -> str:
    group_of = {}
    for gi, gr in enumerate(group_degeneracies(spec)):
        for l in gr.levels:
            group_of[l.key] = gi
    fam_of = {}
    if dec is not None:
        for fi, f in enumerate(dec.families):
            for l in f.levels:
                fam_of[l.key] = (fi, f.label)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "index", "energy", "degeneracy_group", "family_id", "family_form"])
    for l in spec.levels:
        fi, lab = fam_of.get(l.key, ("", ""))
        w.writerow([l.block, l.index, f"{l.energy:.12g}", group_of[l.key], fi, lab])
    return buf.getvalue()


def plot_data_csv(spec: Spectrum, dec: Optional[Decomposition] = None) -> str:
    fam_of = {}
    if dec is not None:
        for fi, f in enumerate(dec.families):
            for l in f.levels:
                fam_of[l.key] = fi
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stratum", "energy", "family_id"])
    for l in spec.levels:
        w.writerow([l.stratum, f"{l.energy:.12g}", fam_of.get(l.key, "")])
    return buf.getvalue()


def continuum_threshold(H: GridOperator) -> float:
    """Smallest potential value at the interval ends over all blocks."""
    vals = []
    for r in range(H.p + 1):
        d = H.block(r, r).diagonal()
        kin = 1.0 / H.grid.h**2
        vals += [d[0] - kin, d[-1] - kin]
    return float(min(vals))
