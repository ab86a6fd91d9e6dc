import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

from parasusy.grid import Grid  # noqa: E402
from parasusy.operators import build_operators  # noqa: E402
from parasusy.spectral import decompose, eigensolve_blocks  # noqa: E402
from parasusy.superpotential import preset  # noqa: E402


@pytest.fixture(scope="session")
def harmonic_run():
    """Harmonic model on [-12, 12], n = 2048, decomposed up to E = 5.5."""
    g = Grid(-12.0, 12.0, 2048)
    S = preset("harmonic", 1.0)
    ops = build_operators(S, g)
    spec = eigensolve_blocks(ops.H, E_cut=6.5)
    dec = decompose(spec, ops, 5.5)
    return S, g, ops, spec, dec


@pytest.fixture(scope="session")
def flipped_run():
    g = Grid(-12.0, 12.0, 2048)
    S = preset("harmonic", 1.0).flipped()
    ops = build_operators(S, g)
    spec = eigensolve_blocks(ops.H, E_cut=6.5)
    dec = decompose(spec, ops, 5.5)
    return S, g, ops, spec, dec


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
