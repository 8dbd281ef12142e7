import numpy as np
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spd
from randpgd.grid import ParameterGrid, uniform_axis
from randpgd.linalg import GramPair, dual_norm, xnorm
from randpgd.pgd import CanonicalTensor
from randpgd.sketch import f_cdf, reg_inc_beta, sample_size

GRAM = GramPair(sp.csc_matrix(random_spd(np.random.default_rng(3), 6)))
GRID = ParameterGrid([uniform_axis(0.0, 1.0, 3), uniform_axis(0.0, 1.0, 4)])
finite = st.floats(-1e3, 1e3, allow_nan=False)
vectors = arrays(np.float64, 6, elements=finite)


def tensor(seed, rank):
    rng = np.random.default_rng(seed)
    return CanonicalTensor(
        GRID, rng.standard_normal((rank, 5, 1)), [rng.standard_normal((rank, s)) for s in (3, 4)]
    )


@given(st.integers(0, 2**31), st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_evaluation_is_additive_over_concatenation(s1, s2, r1, r2):
    a, b = tensor(s1, r1), tensor(s2, r2)
    pts = GRID.full()
    np.testing.assert_allclose(
        a.concat(b).evaluate_points(pts), a.evaluate_points(pts) + b.evaluate_points(pts),
        rtol=1e-12, atol=1e-12,
    )


@given(vectors, st.floats(-1e3, 1e3, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_norms_are_absolutely_homogeneous(v, c):
    for norm in (xnorm, dual_norm):
        assert np.isclose(norm(c * v, GRAM), abs(c) * norm(v, GRAM), rtol=1e-9, atol=1e-9)


@given(vectors, vectors)
@settings(max_examples=50, deadline=None)
def test_triangle_and_duality(u, v):
    assert xnorm(u + v, GRAM) <= xnorm(u, GRAM) + xnorm(v, GRAM) + 1e-9
    assert abs(u @ v) <= dual_norm(u, GRAM) * xnorm(v, GRAM) * (1 + 1e-9) + 1e-9


@given(st.floats(1e-6, 0.5), st.floats(1.7, 16.0), st.integers(1, 10**12), st.integers(1, 10**3))
@settings(max_examples=60, deadline=None)
def test_sample_size_monotone_in_cardinality(delta, w, n, extra):
    assert sample_size(delta, w, n) <= sample_size(delta, w, n + extra)
    assert sample_size(delta, w, n) >= sample_size(min(2 * delta, 0.99), w, n)


@given(st.floats(1e-3, 1e3), st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_f_cdf_reciprocal_symmetry(x, k):
    assert abs(f_cdf(x, k) + f_cdf(1.0 / x, k) - 1.0) < 1e-10


@given(st.integers(0, 2**20), st.floats(0.1, 50.0), st.floats(0.1, 50.0))
@settings(max_examples=60, deadline=None)
def test_reg_inc_beta_reflection(j, a, b):
    x = j / 2**20  # 1 - x is exact
    assert abs(reg_inc_beta(x, a, b) + reg_inc_beta(1.0 - x, b, a) - 1.0) < 1e-10
