import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from parasusy.grid import Grid, d1, d2
from parasusy.operators import (
    DERIVATIVE_TABLE,
    ConstraintViolation,
    build_H,
    build_H_symbolic,
    build_N,
    build_Q,
    build_Q_symbolic,
    build_Qdag,
    build_Qdag_symbolic,
    build_hermitian_charges,
    build_operators,
    hamiltonian_diagonals,
    number_commutator,
    power,
)
from parasusy.superpotential import Exponential, Linear, Sine, SuperpotentialSet, preset
from parasusy.weyl import DiffOp, Poly, matrix_adjoint

G128 = Grid(-4.0, 4.0, 128)


def zero_set(p):
    return SuperpotentialSet(p, (Linear(0, 0),) * p)


def models():
    return [
        SuperpotentialSet(1, (Sine(1, 1),)),
        SuperpotentialSet(2, (Linear(1, 0), Linear(1, 0))),
        preset("harmonic", 1.0),
        preset("morse", 1.0, -1.0, 1.0),
    ]


def test_free_p1_charge_is_minus_derivative():
    Q = build_Q(zero_set(1), G128)
    assert set(Q.blocks) == {(1, 0)}
    assert (Q.block(1, 0) + d1(G128)).count_nonzero() == 0
    assert power(Q, 2).is_structurally_zero()


@pytest.mark.parametrize("S", models(), ids=lambda S: f"p{S.p}")
def test_structural_identities(S):
    Q = build_Q(S, G128)
    assert all(r == c + 1 for r, c in Q.blocks)
    assert power(Q, S.p + 1).is_structurally_zero()
    assert power(Q.T, S.p + 1).is_structurally_zero()
    assert Q.T.equals(build_Qdag(S, G128))
    Qd = build_Qdag(S, G128)
    assert number_commutator(Qd).equals(Qd)
    assert number_commutator(Q).equals(Q.scale(-1))


def test_number_commutator_agrees_with_matrix_product():
    S = preset("harmonic", 1.0)
    Qd = build_Qdag(S, G128).matrix
    N = build_N(3, G128).matrix
    # the dense product rounds 3a - 2a, so compare to within a few ulps
    assert abs((N @ Qd - Qd @ N) - Qd).max() <= 4 * np.finfo(float).eps * abs(Qd).max()


def test_symbolic_adjoint_matches_direct_raising_charge():
    polys = [Poly.x()] * 3
    assert matrix_adjoint(build_Q_symbolic(polys)) == build_Qdag_symbolic(polys)


def test_q_blocks_follow_superpotential_order():
    S = SuperpotentialSet(3, (Linear(1, 0), Linear(0, 2), Linear(0, 3)))
    Q = build_Q(S, G128)
    D = d1(G128)
    for r, c in ((1, 0), (2, 1), (3, 2)):
        diag = (Q.block(r, c) + D).diagonal()
        assert np.allclose(diag, S.W[c].value(G128.x))


def test_harmonic_hamiltonian_spin_term():
    S = preset("harmonic", 1.0)
    H = build_H(S, G128)
    assert H.block_diagonal_only()
    kin = -0.5 * d2(G128)
    for r, m in enumerate((1.5, 0.5, -0.5, -1.5)):
        V = (H.block(r, r) - kin).diagonal()
        assert np.allclose(V, G128.x**2 / 2 + m, atol=1e-12)
        B = H.block(r, r)
        assert (B - B.T).count_nonzero() == 0


def test_free_hamiltonian():
    H = build_H(zero_set(3), G128)
    for r in range(4):
        assert abs(H.block(r, r) + 0.5 * d2(G128)).max() == 0


def test_p2_oscillator_hamiltonian():
    S = SuperpotentialSet(2, (Linear(1, 0), Linear(1, 0)))
    diags = hamiltonian_diagonals(S, G128.x)
    for v, m in zip(diags, (1, 0, -1)):
        assert np.allclose(v, G128.x**2 / 2 + m)


def test_p1_oscillator_hamiltonian():
    diags = hamiltonian_diagonals(SuperpotentialSet(1, (Linear(1, 0),)), G128.x)
    assert np.allclose(diags[0], G128.x**2 / 2 + 0.5)
    assert np.allclose(diags[1], G128.x**2 / 2 - 0.5)


def test_diagonal_recursion():
    # successive diagonal potentials of 2pH differ by 2p W_i'
    S = preset("morse", 1.0, -1.0, 1.0)
    diags = hamiltonian_diagonals(S, G128.x)
    for i in range(3):
        assert np.allclose(6 * (diags[i] - diags[i + 1]), 6 * S.W[i].derivative(G128.x))
    for p, rows in DERIVATIVE_TABLE.items():
        for a, b in zip(rows, rows[1:]):
            diff = [u - v for u, v in zip(a, b)]
            assert sum(diff) == 2 * p


def test_constraint_violation_raises():
    S = SuperpotentialSet(3, (Linear(1, 0), Linear(2, 0), Linear(1, 0)))
    with pytest.raises(ConstraintViolation, match="constraint_c"):
        build_H(S, G128)
    build_H(S, G128, check=False)


def test_number_operator():
    N = build_N(3, G128)
    assert [N.block(r, r).diagonal()[0] for r in range(4)] == [3, 2, 1, 0]
    N1 = build_N(1, G128)
    assert [N1.block(r, r).diagonal()[0] for r in range(2)] == [1, 0]


@pytest.mark.parametrize("S", [preset("morse", 1.0, -1.0, 1.0), zero_set(3)], ids=["morse", "free"])
def test_hermitian_charges(S):
    Q = build_Q(S, G128)
    Q1, Q2 = build_hermitian_charges(Q)
    assert Q1.conj_transpose().equals(Q1)
    assert Q2.conj_transpose().equals(Q2)
    assert not Q1.is_complex and Q2.is_complex
    assert all(np.all(b.data.real == 0) for b in Q2.blocks.values())
    back = (Q1 - Q2.scale(1j)).scale(math.sqrt(3)).matrix
    assert abs(back - Q.matrix).max() < 1e-14
    assert Q2.block_diagonal_only() is False and all(r != c for r, c in Q2.blocks)


def test_operator_set_and_coo_export():
    ops = build_operators(preset("harmonic", 1.0), Grid(-1, 1, 8))
    assert set(ops.letters()) == {"Q", "Qd", "H", "N", "Q1", "Q2"}
    text = ops.Q.to_coo_text().splitlines()
    assert text[0] == "3 8"
    rows = [tuple(line.split()) for line in text[1:]]
    assert len(rows) == ops.Q.matrix.nnz
    r, c, v = rows[0]
    assert ops.Q.matrix[int(r), int(c)] == float(v)


def test_symbolic_hamiltonian_harmonic():
    H = build_H_symbolic([Poly.x()] * 3)
    for r, m in enumerate((1.5, 0.5, -0.5, -1.5)):
        want = DiffOp.d(2).scale(-0.5) + DiffOp.mul(Poly([m, 0, 0.5]))
        assert H[r, r] == want


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 1.5))
def test_transpose_identity_for_random_models(k1, k2, alpha):
    S = preset("morse", k1, k2, alpha) if abs(k1) > 1e-3 else zero_set(3)
    g = Grid(-2, 3, 32)
    assert build_Q(S, g).T.equals(build_Qdag(S, g))
