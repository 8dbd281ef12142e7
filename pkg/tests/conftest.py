import numpy as np
import pytest
import scipy.sparse as sp

from randpgd.grid import ParameterGrid, uniform_axis
from randpgd.linalg import AffineOperator, AffineRHS, GramPair


def random_spd(rng, n, shift=1.0):
    a = rng.standard_normal((n, n))
    return a @ a.T / n + shift * np.eye(n)


def random_problem(rng, n=8, shape=(4, 5), n_terms=3, n_rhs=2, spd=True):
    """Small affine problem with positive coefficients and SPD terms."""
    grid = ParameterGrid([uniform_axis(0.5, 1.5, s) for s in shape])
    mats = [random_spd(rng, n, shift=1.0 if q == 0 else 0.1) for q in range(n_terms)]
    coef = [[None] * len(shape)] + [
        [rng.uniform(0.1, 1.0, s) for s in shape] for _ in range(n_terms - 1)
    ]
    blocks = [rng.standard_normal(n) for _ in range(n_rhs)]
    rcoef = [[rng.uniform(-1.0, 1.0, s) for s in shape] for _ in range(n_rhs)]
    rhs = AffineRHS(blocks, rcoef, grid)
    return AffineOperator(mats, coef, grid, rhs=rhs, spd=spd)


def dense_assemble(op, index):
    out = np.zeros((op.n, op.n))
    for q, m in enumerate(op.matrices):
        c = 1.0
        for i, t in enumerate(op.tables[q]):
            c *= t[index[i]]
        out += c * m.toarray()
    return out


def dense_rhs(rhs, index):
    out = np.zeros(rhs.blocks[0].shape)
    for s, b in enumerate(rhs.blocks):
        c = 1.0
        for i, t in enumerate(rhs.tables[s]):
            c *= t[index[i]]
        out += c * b
    return out[:, 0] if out.shape[1] == 1 else out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_problem(rng):
    return random_problem(rng)


@pytest.fixture
def small_gram(rng):
    return GramPair(sp.csc_matrix(random_spd(rng, 8)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
