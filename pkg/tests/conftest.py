import numpy as np
import pytest

from varlex.spaces import Cell, CellKind, SpaceSpec


def random_space(rng, n=None, allow_inf=True, lo=1.0, hi=6.0, kinds=False):
    """Random finite space: up to 32 cells, exponents in [lo, hi] plus occasional 1 and inf."""
    n = int(rng.integers(1, 33)) if n is None else n
    cells = []
    for _ in range(n):
        u = rng.random()
        if allow_inf and u < 0.08:
            p = np.inf
        elif u < 0.16:
            p = 1.0
        else:
            p = float(rng.uniform(lo, hi))
        w = float(np.exp(rng.uniform(-2, 2)))
        kind = CellKind.DIFFUSE if kinds and rng.random() < 0.5 else CellKind.ATOM
        cells.append(Cell(w, p, kind))
    return SpaceSpec(tuple(cells))


def random_function(rng, n, zeros=True):
    f = rng.standard_normal(n) * np.exp(rng.uniform(-3, 3))
    if zeros:
        f[rng.random(n) < 0.15] = 0.0
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
