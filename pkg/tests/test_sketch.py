import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy import special, stats

from conftest import dense_assemble, dense_rhs, random_problem, random_spd
from randpgd.certify.truth import truth_solutions
from randpgd.pgd import CanonicalTensor, GreedyConfig, greedy_solve
from randpgd.sketch import (
    ExactDual,
    SigmaSpec,
    chi2_tail_bound,
    draw_sketch,
    estimate_norm,
    exact_estimators,
    f_cdf,
    f_effectivity_bound,
    fast_estimators,
    load_sketch,
    reg_inc_beta,
    sample_size,
    save_sketch,
    standard_normal_column,
)

# -- sample sizes -----------------------------------------------------------------


def test_sample_size_examples():
    assert sample_size(1e-2, 2, 10**3) == 60
    assert sample_size(1e-4, 10, 10**9) == 17
    assert sample_size(1e-2, 10, 500, "relative") == 18


def test_sample_size_formula_oracle():
    for d in (1e-2, 1e-4):
        for w in (2.0, 4.0, 10.0):
            for card in (1, 10**3, 10**6, 10**9):
                raw = (math.log(card) + math.log(1 / d)) / math.log(w / math.sqrt(math.e))
                assert sample_size(d, w, card) == max(3, math.ceil(raw))


def test_sample_size_domain():
    with pytest.raises(ValueError):
        sample_size(1e-2, 1.5, 10)
    with pytest.raises(ValueError):
        sample_size(1e-2, 2.5, 10, "relative")
    with pytest.raises(ValueError):
        sample_size(0.0, 4, 10)
    assert sample_size(1e-2, 4, 500, "relative", m_max=20) > sample_size(1e-2, 4, 500, "relative")


def test_chi2_tail_bound():
    assert chi2_tail_bound(2, 48) == pytest.approx(9.41e-5, rel=2e-3)
    assert chi2_tail_bound(2, 48) < 2e-4
    assert chi2_tail_bound(math.sqrt(math.e) * (1 + 1e-12), 3) == pytest.approx(1.0, abs=1e-10)
    assert chi2_tail_bound(4, 11) == pytest.approx((math.sqrt(math.e) / 4) ** 11, rel=1e-14)
    assert chi2_tail_bound(4, 11) == pytest.approx(5.9e-5, rel=2e-2)  # quoted to two digits
    with pytest.raises(ValueError):
        chi2_tail_bound(1.5, 10)
    with pytest.raises(ValueError):
        chi2_tail_bound(2, 2)


def test_chi2_tail_bound_dominates_exact_tail():
    for w, k in [(2, 10), (4, 5), (10, 3), (2, 48)]:
        exact = stats.chi2.cdf(k / w**2, k) + stats.chi2.sf(k * w**2, k)
        assert exact <= chi2_tail_bound(w, k)


# -- F distribution ----------------------------------------------------------------


def test_f_cdf_symmetry_point():
    for k in (1, 2, 5, 20, 101):
        assert f_cdf(1.0, k) == pytest.approx(0.5, abs=1e-14)
    for a in (0.5, 1.0, 3.5, 40.0):
        assert reg_inc_beta(0.5, a, a) == pytest.approx(0.5, abs=1e-14)


def test_reg_inc_beta_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, a, b = rng.random(), rng.uniform(0.2, 30), rng.uniform(0.2, 30)
        assert reg_inc_beta(x, a, b) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


def test_f_cdf_monte_carlo():
    rng = np.random.default_rng(1)
    n = 10**7
    ratio = rng.chisquare(10, n) / rng.chisquare(10, n)
    p = np.mean(ratio <= 2.0)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(f_cdf(2.0, 10) - p) <= 3 * se


def test_f_cdf_domain():
    with pytest.raises(ValueError):
        f_cdf(-1.0, 3)
    with pytest.raises(ValueError):
        reg_inc_beta(1.5, 1, 1)


def test_f_effectivity_bound_limits():
    assert f_effectivity_bound(1e3, 20, 1) >= 0.999
    assert f_effectivity_bound(2, 20, 0) == 1.0
    values = [f_effectivity_bound(w, 20, 500) for w in (1.5, 2, 3, 5)]
    assert all(b > a for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        f_effectivity_bound(1.0, 20, 5)


def test_f_effectivity_bound_monte_carlo():
    # orthogonal construction: eta^2 is F(K, K); one point per trial
    rng = np.random.default_rng(2)
    k, w, trials = 20, 2.0, 10**4
    eta2 = rng.chisquare(k, trials) / rng.chisquare(k, trials)
    freq = np.mean((eta2 >= 1 / w**2) & (eta2 <= w**2))
    bound = f_effectivity_bound(w, k, 1)
    se = math.sqrt(bound * (1 - bound) / trials)
    assert abs(freq - bound) <= 4 * se
    assert f_effectivity_bound(w, k, 500) == pytest.approx(1 - 500 * (1 - bound), rel=1e-10)


# -- sketches ------------------------------------------------------------------------


def test_identity_sketch_mean():
    s = draw_sketch(SigmaSpec.identity(3), 100_000, seed=4)
    z = s.z_block
    assert np.all(np.abs(z.mean(axis=1)) <= 4 / math.sqrt(z.shape[1]))


def test_scalar_qoi_sketch_is_multiple_of_l(rng):
    l = rng.standard_normal(6)
    s = draw_sketch(SigmaSpec("scalar_qoi", vector=l), 5, seed=0)
    for i in range(5):
        z = s.column(i)
        c = z @ l / (l @ l)
        np.testing.assert_allclose(z, c * l, atol=1e-14)


def test_diagonal_covariance_variance():
    s = draw_sketch(SigmaSpec("gram_natural", matrix=sp.diags([1.0, 4.0]).tocsc()), 100_000, seed=5)
    v = np.var(s.z_block[1])
    se = 4.0 * math.sqrt(2 / 100_000)
    assert abs(v - 4.0) <= 3 * se


def test_sketch_covariance_converges(rng):
    sig = random_spd(rng, 5)
    s = draw_sketch(SigmaSpec("gram_natural", matrix=sp.csc_matrix(sig)), 200_000, seed=6)
    cov = s.z_block @ s.z_block.T / s.k
    assert np.max(np.abs(cov - sig)) <= 0.05 * np.max(np.abs(sig))


def test_qoi_sketch_covariance(rng):
    ext = rng.standard_normal((2, 5))
    wgt = random_spd(rng, 2)
    spec = SigmaSpec("qoi", extractor=ext, weight=wgt)
    u = spec.factor()
    np.testing.assert_allclose(u.T @ u, ext.T @ wgt @ ext, atol=1e-12)


def test_sigma_must_be_psd():
    with pytest.raises(ValueError):
        draw_sketch(SigmaSpec("gram_natural", matrix=sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))), 2, 0)
    with pytest.raises(ValueError):
        SigmaSpec("bogus")


def test_sketch_reproducible_by_column():
    sigma = SigmaSpec.identity(7)
    a = draw_sketch(sigma, 4, seed=11)
    b = draw_sketch(sigma, 9, seed=11)
    np.testing.assert_array_equal(a.z_block, b.z_block[:, :4])
    np.testing.assert_array_equal(a.column(2), standard_normal_column(11, 2, 7))


def test_sketch_save_load(tmp_path):
    sigma = SigmaSpec.identity(5)
    s = draw_sketch(sigma, 3, seed=2)
    save_sketch(s, tmp_path / "s.json")
    t = load_sketch(tmp_path / "s.json", sigma)
    np.testing.assert_array_equal(s.z_block, t.z_block)
    with pytest.raises(ValueError):
        load_sketch(tmp_path / "s.json", SigmaSpec.identity(6))


def test_estimate_norm_zero_and_replay():
    s = draw_sketch(SigmaSpec.identity(2), 2, seed=8)
    assert estimate_norm(s, np.zeros(2)) == 0
    z1 = standard_normal_column(8, 0, 2)
    z2 = standard_normal_column(8, 1, 2)
    want = math.sqrt((z1[0] ** 2 + z2[0] ** 2) / 2)
    assert estimate_norm(s, np.array([1.0, 0.0])) == pytest.approx(want, rel=1e-15)
    with pytest.raises(ValueError):
        estimate_norm(s, np.ones(3))


def test_estimate_norm_scale_equivariance(rng):
    s = draw_sketch(SigmaSpec.identity(10), 6, seed=3)
    v = rng.standard_normal(10)
    assert estimate_norm(s, -2.5 * v) == pytest.approx(2.5 * estimate_norm(s, v), rel=1e-15)


def test_estimate_norm_unbiased(rng):
    sig = random_spd(rng, 12)
    sigma = SigmaSpec("gram_natural", matrix=sp.csc_matrix(sig))
    v = rng.standard_normal(12)
    est = np.array([estimate_norm(draw_sketch(sigma, 1, seed), v) ** 2 for seed in range(2000)])
    assert abs(est.mean() - v @ sig @ v) <= 3 * est.std(ddof=1) / math.sqrt(est.size)


# -- estimators -----------------------------------------------------------------------


def _interpolant(op, pts, u):
    """Tensor equal to ``u[j]`` at point ``j`` (one indicator term per point)."""
    factors = [np.eye(s)[pts.index[:, i]] for i, s in enumerate(op.grid.shape)]
    return CanonicalTensor(op.grid, u[:, :, None], factors)


@pytest.fixture
def estimator_setup(rng):
    op = random_problem(rng, n=10, shape=(5, 4), spd=False)
    t = greedy_solve(op, cfg=GreedyConfig(max_rank=2))
    pts = op.grid.full()
    u = truth_solutions(op, points=pts)
    return op, t, pts, u


def test_exact_estimators_zero_for_exact(estimator_setup):
    op, _, pts, u = estimator_setup
    exact = _interpolant(op, pts, u)
    s = draw_sketch(SigmaSpec.identity(op.n), 4, 0)
    b = exact_estimators(u, exact, s, pts)
    assert np.max(b.delta) <= 1e-12 * np.max(np.linalg.norm(u, axis=1))


def test_exact_estimator_concentrates(estimator_setup):
    op, t, pts, u = estimator_setup
    one = pts.subset([7])
    s = draw_sketch(SigmaSpec.identity(op.n), 10_000, seed=1)
    b = exact_estimators(u[[7]], t, s, one)
    err = np.linalg.norm(u[7] - t.evaluate_index(one.index[0])[:, 0])
    assert 0.97 <= b.delta[0] / err <= 1.03


def test_error_residual_identity(estimator_setup):
    op, t, pts, u = estimator_setup
    s = draw_sketch(SigmaSpec.identity(op.n), 5, seed=2)
    ex = exact_estimators(u, t, s, pts)
    fast = fast_estimators(op, None, t, ExactDual(op, s), s, pts)
    np.testing.assert_allclose(fast.delta, ex.delta, rtol=1e-9)
    np.testing.assert_allclose(fast.delta_rel, ex.delta_rel, rtol=1e-9)
    assert fast.rms == pytest.approx(np.sqrt(np.mean(fast.delta**2)), rel=1e-14)


def test_fast_estimator_zero_residual(estimator_setup):
    op, _, pts, u = estimator_setup
    exact = _interpolant(op, pts, u)
    s = draw_sketch(SigmaSpec.identity(op.n), 3, 0)
    y = greedy_solve(op.transpose(), s.z_block, GreedyConfig(max_rank=1))
    b = fast_estimators(op, None, exact, y, s, pts)
    assert np.max(b.delta) <= 1e-9 * np.max(np.abs(b.den2)) ** 0.5


def test_fast_estimator_column_mismatch(estimator_setup):
    op, t, pts, _ = estimator_setup
    s = draw_sketch(SigmaSpec.identity(op.n), 3, 0)
    y = greedy_solve(op.transpose(), np.ones((op.n, 2)), GreedyConfig(max_rank=1))
    with pytest.raises(ValueError):
        fast_estimators(op, None, t, y, s, pts)


def test_denominator_flag(estimator_setup):
    op, t, pts, u = estimator_setup
    s = draw_sketch(SigmaSpec.identity(op.n), 3, 0)
    b = exact_estimators(np.zeros_like(u), t, s, pts)
    assert np.all(np.isinf(b.delta_rel)) and b.flagged.all()
