import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parasusy.grid import Grid, antiderivative, antiderivative_from, convergence_order, d1, d2


def test_grid_geometry():
    g = Grid(0.0, 1.0, 9)
    assert g.h == pytest.approx(0.1)
    assert g.x[0] == pytest.approx(0.1) and g.x[-1] == pytest.approx(0.9)
    assert g.refined().h == pytest.approx(0.05)
    assert g.index_nearest(0.42) == 3


@pytest.mark.parametrize("args", [(1.0, 0.0, 16), (0.0, 1.0, 4), (0.0, 1.0, 10.5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        Grid(*args)


def test_stencil_symmetry_is_exact():
    g = Grid(-3.0, 5.0, 64)
    D, L = d1(g), d2(g)
    assert (D + D.T).count_nonzero() == 0
    assert (L - L.T).count_nonzero() == 0


def test_inner_product_is_weighted():
    g = Grid(0.0, np.pi, 4000)
    assert g.norm(np.sin(g.x)) ** 2 == pytest.approx(np.pi / 2, rel=1e-6)
    assert g.norm(g.normalize(g.x + 1)) == pytest.approx(1.0)


def _stencil_errors(op, exact):
    hs, errs = [], []
    for n in (255, 511, 1023):
        g = Grid(-np.pi, np.pi, n)
        f = np.sin(g.x) ** 3  # vanishes at both ends with its first derivative... enough for the interior
        inner = slice(n // 8, -n // 8)
        errs.append(np.max(np.abs((op(g) @ f - exact(g.x))[inner])))
        hs.append(g.h)
    return hs, errs


def test_first_derivative_second_order():
    hs, errs = _stencil_errors(d1, lambda x: 3 * np.sin(x) ** 2 * np.cos(x))
    assert convergence_order(hs, errs) == pytest.approx(2.0, abs=0.1)


def test_second_derivative_second_order():
    hs, errs = _stencil_errors(d2, lambda x: 6 * np.sin(x) * np.cos(x) ** 2 - 3 * np.sin(x) ** 3)
    assert convergence_order(hs, errs) == pytest.approx(2.0, abs=0.1)


def test_antiderivative_trapezoid():
    g = Grid(0.0, 2.0, 2000)
    F = antiderivative(np.cos(g.x), g)
    assert F[0] == 0.0
    assert np.max(np.abs(F - (np.sin(g.x) - np.sin(g.x[0])))) < 1e-6
    G = antiderivative_from(np.cos(g.x), g, 1.0)
    assert np.max(np.abs(G - (np.sin(g.x) - np.sin(g.x[g.index_nearest(1.0)])))) < 1e-6


@given(st.floats(0.5, 4.0), st.floats(1e-3, 10.0))
def test_convergence_order_recovers_power_law(order, c):
    hs = [0.1, 0.05, 0.025]
    assert convergence_order(hs, [c * h**order for h in hs]) == pytest.approx(order, abs=1e-9)
