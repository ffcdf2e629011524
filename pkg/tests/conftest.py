import numpy as np
import pytest

from privcurve import LinearMap

REMARK_ENTRIES = [
    [2.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 3.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 4.0, 0.0, 0.0],
]

ACCEPTANCE_LINES = []


@pytest.fixture
def remark_map():
    """n=5, m=r=3 with singular values (2, 3, 4)."""
    return LinearMap(np.array(REMARK_ENTRIES))


@pytest.fixture
def scrambled_remark_map():
    """Same singular values, rotated so no factor is a permutation."""
    rng = np.random.default_rng(11)
    U, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    V, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    return LinearMap(U @ np.array(REMARK_ENTRIES) @ V.T)


def random_map(rng, max_dim=20, offset=False):
    m, n = rng.integers(1, max_dim + 1, size=2)
    b = rng.standard_normal(m) if offset else None
    return LinearMap(rng.standard_normal((m, n)), b)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
