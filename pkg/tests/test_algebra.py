import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parasusy.algebra import (
    EXACT_FLOOR,
    Relation,
    SigmaWord,
    adjoint_relation,
    apply_relation,
    check_hermitian_form,
    check_numeric,
    check_symbolic,
    coarsening_grids,
    commuting_set_relations,
    hermitian_relations,
    judge,
    negative_energy_certificate,
    numeric_suite,
    refinement_grids,
    relation_residual,
    relations_for,
    relations_p3,
    smooth_test_vectors,
    symbolic_suite,
)
from parasusy.grid import Grid
from parasusy.operators import build_operators
from parasusy.superpotential import Linear, Sine, SuperpotentialError, SuperpotentialSet, preset

MORSE = preset("morse", 1.0, -1.0, 1.0)
MORSE_GRIDS = [Grid(-4.0, 10.0, n) for n in (512, 1024, 2048)]
HARM = preset("harmonic", 1.0)
HARM_GRIDS = [Grid(-12.0, 12.0, n) for n in (512, 1024, 2048)]


def by_name(items, name):
    return next(r for r in items if getattr(r, "name", None) == name or getattr(r, "relation", None) == name)


# --- catalogue bookkeeping ---------------------------------------------------


def test_catalogues_are_homogeneous():
    for rels in (relations_for(1), relations_for(2), relations_for(3), commuting_set_relations(), hermitian_relations()):
        for r in rels:
            assert r.is_homogeneous(), r.name


@given(st.integers(0, 4), st.integers(0, 4))
def test_sigma_monomial_count(i, j):
    if i + j > 4:
        return
    mons = SigmaWord(i, j).monomials
    assert len(mons) == math.comb(i + j, i)
    assert len(set(mons)) == len(mons)
    assert all(m.count("Q1") == i and m.count("Q2") == j for m in mons)


def test_sigma_examples():
    assert sorted(SigmaWord(1, 1).monomials) == [("Q1", "Q2"), ("Q2", "Q1")]
    assert len(SigmaWord(2, 2).monomials) == 6


def test_relation_from_strings():
    r = Relation.of("x", [(1, "Q Qd"), (1, "Qd Q")], [(2, "H")])
    assert r.terms() == [(1, ("Q", "Qd")), (1, ("Qd", "Q")), (-2, ("H",))]
    assert r.letters() == {"Q", "Qd", "H"}


def test_judge_rules():
    assert judge([1e-3, 2.5e-4], 2.0)
    assert not judge([1e-3, 5e-4], 1.0)
    assert judge([1e-12, 1e-11], -3.0)
    assert not judge([1e-3, 1e-3], None)


# --- symbolic backend ------------------------------------------------------------


@pytest.mark.parametrize("p", [1, 2, 3])
def test_symbolic_suite_exact_for_oscillators(p):
    S = SuperpotentialSet(p, (Linear(1, 0),) * p)
    verdicts = symbolic_suite(S)
    assert [v.relation for v in verdicts] == [r.name for r in relations_for(p)]
    assert all(v.passed for v in verdicts)


@given(st.integers(-3, 3).filter(bool), st.integers(-3, 3))
def test_symbolic_suite_exact_for_shifted_oscillators(k1, k2):
    S = preset("harmonic", float(k1), float(k2))
    assert all(v.passed for v in symbolic_suite(S))


def test_symbolic_reports_violation():
    S = SuperpotentialSet(3, (Linear(1, 0), Linear(2, 0), Linear(1, 0)))
    v = check_symbolic(by_name(relations_p3(), "commute_Q_H"), S)
    assert not v.passed and v.first_nonzero.startswith("[")
    assert v.to_json()["pass"] is False


def test_symbolic_rejects_non_polynomial():
    with pytest.raises(SuperpotentialError):
        check_symbolic(relations_p3()[0], SuperpotentialSet(3, (Sine(1, 1),) * 3))
    with pytest.raises(SuperpotentialError):
        check_symbolic(hermitian_relations()[0], HARM)


# --- numeric backend -----------------------------------------------------------------


def test_test_vectors_seeded_and_grid_independent():
    g1, g2 = Grid(-3, 3, 255), Grid(-3, 3, 511)
    a = smooth_test_vectors(g1, 1, 2, seed=7)
    b = smooth_test_vectors(g1, 1, 2, seed=7)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    c = smooth_test_vectors(g2, 1, 2, seed=7)
    # node k of g1 is node 2k+1 of g2: same continuous field
    assert np.allclose(a[0][:255], c[0][:511][1::2])
    edge = np.abs(a[0][:10]).max()
    assert edge < 1e-8 * np.abs(a[0]).max()


def test_morse_mixed_quartic_converges():
    v = check_numeric(by_name(relations_p3(), "quartic_mixed"), MORSE, MORSE_GRIDS, seed=0)
    assert v.residual <= 1e-3
    assert v.order == pytest.approx(2.0, abs=0.3)
    assert v.passed


def test_morse_ladder_relations_converge():
    for v in numeric_suite(relations_p3(), MORSE, MORSE_GRIDS):
        assert v.passed, v.to_json()


FREE = SuperpotentialSet(3, (Linear(0, 0),) * 3)
STENCIL_EXACT = ("nilpotent_Q", "nilpotent_Qd", "commute_Q_H", "commute_Qd_H", "quartic_mixed")


def _free_residuals():
    ops = build_operators(FREE, Grid(-5, 5, 256))
    vecs = smooth_test_vectors(ops.grid, 3, 3, seed=1)
    return {r.name: relation_residual(r, ops, vecs) for r in relations_p3()}


def test_free_case_stencil_exact_relations():
    res = _free_residuals()
    for name in STENCIL_EXACT:
        assert res[name] <= 1e-12, name


@pytest.mark.xfail(
    strict=True,
    reason="Q Qd is the wide stencil D.D while H uses the 3-point Laplacian, so quartic relations "
    "mixing charges with H carry an O(h^2) residual even for W = 0",
)
def test_free_case_all_relations_stencil_exact():
    assert max(_free_residuals().values()) <= 1e-12


def test_free_case_quartic_lowering_is_second_order():
    v = check_numeric(by_name(relations_p3(), "quartic_lowering"), FREE, [Grid(-5, 5, n) for n in (256, 512, 1024)])
    assert v.order == pytest.approx(2.0, abs=0.2) and v.passed


def test_commuting_set_converges_harmonic():
    for v in numeric_suite(commuting_set_relations(), HARM, HARM_GRIDS):
        assert v.passed, v.to_json()
        if v.residual > EXACT_FLOOR:
            assert v.order == pytest.approx(2.0, abs=0.3)


def test_hermitian_form_harmonic():
    rep = check_hermitian_form(HARM, HARM_GRIDS)
    assert rep.equivalent and rep.passed
    qd = by_name(rep.hermitian, "quartic_difference")
    assert qd.residual <= 1e-3 and qd.order == pytest.approx(2.0, abs=0.3)


def test_hermitian_form_needs_order_three():
    with pytest.raises(SuperpotentialError):
        check_hermitian_form(SuperpotentialSet(1, (Linear(1, 0),)), HARM_GRIDS)


def test_mixed_cubic_on_ground_state(harmonic_run):
    S, g, ops, spec, dec = harmonic_run
    ground = spec.levels[0]
    assert ground.stratum == 0 and ground.energy == pytest.approx(-1.0, abs=5e-3)
    psi = spec.embed(ground).astype(complex)
    r = apply_relation(by_name(hermitian_relations(), "mixed_cubic_symmetry"), ops.letters(), psi)
    assert g.norm(r) / g.norm(psi) <= 1e-3


def _relation_matrix(rel, letters):
    out = None
    for c, w in rel.terms():
        m = letters[w[0]].matrix
        for l in w[1:]:
            m = m @ letters[l].matrix
        out = c * m if out is None else out + c * m
    return out


def test_adjoint_relation_is_matrix_transpose():
    ops = build_operators(MORSE, Grid(-4, 10, 128))
    L = ops.letters()
    low = by_name(relations_p3(), "quartic_lowering")
    a = _relation_matrix(low, L)
    b = _relation_matrix(adjoint_relation(low), L)
    assert abs(a.T - b).max() <= 64 * np.finfo(float).eps * abs(a).max()


def test_raising_is_adjoint_of_lowering():
    low, high = by_name(relations_p3(), "quartic_lowering"), by_name(relations_p3(), "quartic_raising")
    adj = adjoint_relation(low)
    assert sorted(adj.lhs) == sorted(high.lhs)
    # the right-hand sides differ by the order of H and Qd^2, equal once [H, Qd] = 0
    assert adj.rhs == ((6, ("H", "Qd", "Qd")),) and high.rhs == ((6, ("Qd", "Qd", "H")),)
    for S, grids in ((MORSE, MORSE_GRIDS), (HARM, HARM_GRIDS)):
        va, vh = numeric_suite([adj, high], S, grids)
        assert va.passed and vh.passed
        assert va.order == pytest.approx(vh.order, abs=0.1)


def test_grid_ladders():
    g = Grid(0, 1, 256)
    assert [x.n for x in refinement_grids(g)] == [256, 512, 1024]
    assert [x.n for x in coarsening_grids(g)] == [64, 128, 256]


# --- negative energy ------------------------------------------------------------


def test_ground_state_certificate_passes(harmonic_run):
    S, g, ops, spec, dec = harmonic_run
    cert = negative_energy_certificate(spec.embed(spec.levels[0]), ops)
    assert cert.passed
    assert max(cert.q2, cert.qd2, cert.eigen_q1) <= 1e-3


def test_generic_family_members_fail(harmonic_run):
    S, g, ops, spec, dec = harmonic_run
    fam = next(f for f in dec.families if f.generic and abs(f.energy - 2.0) < 0.01)
    n = g.n
    for m in fam.members:
        psi = np.zeros(4 * n)
        psi[m.block * n:(m.block + 1) * n] = m.vector
        assert not negative_energy_certificate(psi, ops).passed


def test_random_state_fails():
    ops = build_operators(SuperpotentialSet(3, (Linear(0, 0),) * 3), Grid(-5, 5, 256))
    psi = smooth_test_vectors(ops.grid, 3, 1, seed=3)[0]
    assert not negative_energy_certificate(psi, ops).passed
