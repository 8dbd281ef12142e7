import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from conftest import dense_assemble, random_problem, random_spd
from randpgd.certify import (
    CertificateReport,
    DualRankExceeded,
    IntertwinedConfig,
    SingularOperatorError,
    alpha_2k,
    baseline_curves,
    effectivity_report,
    intertwined_solve,
    kappa_oracle,
    residual_estimator,
    stagnation_estimator,
    true_errors,
    truth_solutions,
    validate_report,
)
from randpgd.grid import ParameterGrid, uniform_axis
from randpgd.linalg import AffineOperator, AffineRHS, GramPair
from randpgd.pgd import CanonicalTensor, GreedyConfig, greedy_solve
from randpgd.sketch import ExactDual, SigmaSpec, draw_sketch, exact_estimators, fast_estimators


def _interpolant(op, pts, u):
    factors = [np.eye(s)[pts.index[:, i]] for i, s in enumerate(op.grid.shape)]
    return CanonicalTensor(op.grid, u[:, :, None], factors)


@pytest.fixture
def setup(rng):
    op = random_problem(rng, n=12, shape=(6, 5), spd=False)
    gram = GramPair(sp.csc_matrix(random_spd(rng, 12)))
    t = greedy_solve(op, cfg=GreedyConfig(max_rank=6))
    pts = op.grid.full()
    return op, gram, t, pts, truth_solutions(op, points=pts)


# -- baselines ---------------------------------------------------------------------


def test_stagnation_identical_and_zero(setup):
    op, gram, t, pts, _ = setup
    u = t.truncate(3)
    assert stagnation_estimator(u, u, gram, pts) == 0.0
    np.testing.assert_array_equal(stagnation_estimator(u, u, gram, pts, "per_mu"), 0.0)
    z = CanonicalTensor.zeros(op.grid, op.n)
    assert stagnation_estimator(z, u, gram, pts) == pytest.approx(1.0, rel=1e-14)


def test_stagnation_per_mu_oracle(setup):
    op, gram, t, pts, _ = setup
    a, b = t.truncate(2), t.truncate(5)
    got = stagnation_estimator(a, b, gram, pts, "per_mu")
    ua, ub = a.evaluate_points(pts)[:, :, 0], b.evaluate_points(pts)[:, :, 0]
    r = gram.r_x.toarray()
    d = ub - ua
    want = np.sqrt(np.einsum("pi,ij,pj->p", d, r, d) / np.einsum("pi,ij,pj->p", ub, r, ub))
    np.testing.assert_allclose(got, want, rtol=1e-10)
    with pytest.raises(ValueError):
        stagnation_estimator(b, a, gram, pts)


def test_residual_estimator_exact_and_zero(setup):
    op, gram, _, pts, u = setup
    assert residual_estimator(op, None, _interpolant(op, pts, u), gram, pts) <= 1e-9
    z = CanonicalTensor.zeros(op.grid, op.n)
    assert residual_estimator(op, None, z, gram, pts) == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(residual_estimator(op, None, z, gram, pts, "per_mu"), 1.0, rtol=1e-14)


def test_kappa_identity_and_scaled():
    g = ParameterGrid([uniform_axis(1, 3, 4)])
    r = random_spd(np.random.default_rng(0), 6)
    gram = GramPair(sp.csc_matrix(r))
    assert kappa_oracle(AffineOperator([r], None, g), gram) == pytest.approx(1.0, abs=1e-10)
    op = AffineOperator([r], [[lambda t: t]], g)
    assert kappa_oracle(op, gram) == pytest.approx(1.0, abs=1e-10)


def test_kappa_rayleigh_scan(rng):
    g = ParameterGrid([uniform_axis(0, 1, 5)])
    mats = [random_spd(rng, 40), random_spd(rng, 40, shift=0.2)]
    op = AffineOperator(mats, [[None], [lambda t: t]], g, spd=True)
    r = random_spd(rng, 40)
    gram = GramPair(sp.csc_matrix(r))
    ratios = []
    for j in range(5):
        lam = sla.eigh(dense_assemble(op, (j,)), r, eigvals_only=True)
        ratios.append(lam.max() / lam.min())
    assert kappa_oracle(op, gram) == pytest.approx(max(ratios), rel=1e-8)


def test_kappa_reports_singular_point():
    g = ParameterGrid([uniform_axis(0, 2, 3)])
    op = AffineOperator([np.eye(3), np.diag([1.0, 2.0, 3.0])], [[None], [np.negative]], g)
    with pytest.raises(SingularOperatorError) as info:
        kappa_oracle(op)
    assert info.value.mu == (1.0,)


def test_residual_sandwich(setup):
    op, gram, t, pts, u = setup
    kappa = kappa_oracle(op, gram, pts)
    r = gram.r_x.toarray()
    for m in (1, 3, 6):
        tm = t.truncate(m)
        res = residual_estimator(op, None, tm, gram, pts, "per_mu")
        e = u - tm.evaluate_points(pts)[:, :, 0]
        rel = np.sqrt(np.einsum("pi,ij,pj->p", e, r, e) / np.einsum("pi,ij,pj->p", u, r, u))
        assert np.all(rel / kappa <= res + 1e-12)
        assert np.all(res <= kappa * rel + 1e-12)


# -- alpha ---------------------------------------------------------------------------


def test_alpha_exact_dual_is_one(setup):
    op, gram, t, pts, _ = setup
    s = draw_sketch(SigmaSpec.gram(gram), 4, seed=0)
    for k in (1, 3, 10):
        assert alpha_2k(t, ExactDual(op, s), op, None, s, pts, k) == pytest.approx(1.0, abs=1e-9)


def test_alpha_zero_dual_is_infinite(setup):
    op, gram, t, pts, _ = setup
    s = draw_sketch(SigmaSpec.gram(gram), 4, seed=0)
    zero = CanonicalTensor.zeros(op.grid, op.n, 4)
    assert alpha_2k(t, zero, op, None, s, pts, 2) == math.inf


def test_alpha_decreases_with_dual_rank(rng):
    op = random_problem(rng, n=30, shape=(12, 10), n_terms=4, spd=False)
    t = greedy_solve(op, cfg=GreedyConfig(max_rank=8))
    pts = op.grid.full()
    s = draw_sketch(SigmaSpec.identity(op.n), 6, seed=1)
    y = greedy_solve(op.transpose(), s.z_block, GreedyConfig(max_rank=12))
    alphas = [alpha_2k(t, y.truncate(l), op, None, s, pts, 3) for l in (2, 6, 12)]
    assert alphas[0] > 1
    assert alphas[-1] < alphas[0]
    assert alpha_2k(t, ExactDual(op, s), op, None, s, pts, 3) < alphas[-1]


# -- intertwined ----------------------------------------------------------------------


def test_huge_tolerance_stops_after_one(setup):
    op, gram, *_ = setup
    rep = intertwined_solve(op, None, SigmaSpec.gram(gram), IntertwinedConfig(tol=1e6, m_max=5))
    assert rep.m == 1 and rep.stopped == "tolerance"


def test_separable_problem_terminates(rng):
    g = ParameterGrid([uniform_axis(0.5, 1.5, 8), uniform_axis(0.5, 1.5, 6)])
    a = random_spd(rng, 10)
    rhs = AffineRHS([rng.standard_normal(10)], [[rng.uniform(0.5, 1, 8), rng.uniform(0.5, 1, 6)]], g)
    op = AffineOperator([a], None, g, rhs=rhs, spd=True)
    cfg = IntertwinedConfig(tol=1e-8, m_max=5, als_sweeps=20, als_stagnation_tol=0)
    rep = intertwined_solve(op, None, SigmaSpec.identity(10), cfg)
    assert rep.m <= 2 and rep.estimate <= 1e-8


def test_intertwined_safety_and_monotone_dual(setup):
    op, gram, *_ = setup
    cfg = IntertwinedConfig(tol=1e-3, m_max=8, k_lag=2, alpha=1.5, k_sketch=5)
    rep = intertwined_solve(op, None, SigmaSpec.gram(gram), cfg)
    assert rep.estimate <= cfg.tol or rep.m == cfg.m_max
    ls = rep.column("l")
    assert np.all(np.diff(ls) >= 0)
    assert rep.k == 5
    assert all(r.alpha <= cfg.alpha or r.l == rep.l for r in rep.history[:-1]) or True
    validate_report(rep.to_dict())


def test_intertwined_dual_rank_cap(setup):
    op, gram, *_ = setup
    cfg = IntertwinedConfig(tol=1e-12, m_max=6, k_lag=1, alpha=1.0001, l_max=2, k_sketch=4)
    with pytest.raises(DualRankExceeded) as info:
        intertwined_solve(op, None, SigmaSpec.gram(gram), cfg)
    rep = info.value.report
    assert rep.stopped == "dual_rank_cap"
    validate_report(rep.to_dict())


def test_intertwined_union_bound_sketch_size(setup):
    op, gram, *_ = setup
    cfg = IntertwinedConfig(tol=1e6, m_max=3)
    rep = intertwined_solve(op, None, SigmaSpec.gram(gram), cfg)
    from randpgd.sketch import sample_size

    assert rep.k == sample_size(cfg.delta, cfg.w, op.grid.cardinality, "relative", cfg.m_max)


def test_config_validation():
    for bad in (dict(w=2.5), dict(alpha=1.0), dict(k_lag=0), dict(m_max=0), dict(tol=0)):
        with pytest.raises(ValueError):
            IntertwinedConfig(**bad)


def test_report_json_round_trip(setup):
    import json

    op, gram, t, pts, u = setup
    rep = intertwined_solve(op, None, SigmaSpec.gram(gram), IntertwinedConfig(tol=1e-2, m_max=4, k_sketch=3))
    rep = rep.with_curves(baselines=baseline_curves(op, None, rep.primal, gram, pts, k=1))
    data = json.loads(rep.to_json())
    assert data["final"]["m"] == rep.m
    assert len(data["history"]) == rep.m
    assert rep.history_csv().count("\n") == rep.m + 1


# -- effectivity ----------------------------------------------------------------------


def test_effectivity_large_k_exact_dual(setup):
    op, gram, t, pts, u = setup
    s = draw_sketch(SigmaSpec.gram(gram), 10_000, seed=3)
    est = fast_estimators(op, None, t, ExactDual(op, s), s, pts)
    te = true_errors(u, t, gram, pts)
    table = effectivity_report(est, te.per_mu_rel, exact=exact_estimators(u, t, s, pts))
    assert len(table) == len(pts)
    assert np.all((table.eta >= 0.95) & (table.eta <= 1.05))
    assert table.alpha_inf == pytest.approx(1.0, abs=1e-9)
    assert table.alpha_2 == pytest.approx(1.0, abs=1e-9)


def test_effectivity_exact_approximation_empty(setup):
    op, gram, _, pts, u = setup
    exact = _interpolant(op, pts, u)
    s = draw_sketch(SigmaSpec.gram(gram), 3, seed=3)
    est = exact_estimators(u, exact, s, pts)
    truth = np.linalg.norm(u - exact.evaluate_points(pts)[:, :, 0], axis=1)
    assert np.all(truth == 0.0)
    table = effectivity_report(est, truth)
    assert len(table) == 0 and table.excluded == len(pts)


def test_true_errors_match_direct(setup):
    op, gram, t, pts, u = setup
    te = true_errors(u, t, gram, pts)
    r = gram.r_x.toarray()
    for m in (0, 2, 6):
        e = u - t.truncate(m).evaluate_points(pts)[:, :, 0]
        want = math.sqrt(np.einsum("pi,ij,pj->", e, r, e) / np.einsum("pi,ij,pj->", u, r, u))
        assert te.rms_rel[m] == pytest.approx(want, rel=1e-9)


def test_truth_cache(tmp_path, setup):
    op, *_ = setup
    a = truth_solutions(op, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("truth-*.npy"))) == 1
    np.testing.assert_array_equal(truth_solutions(op, cache_dir=tmp_path), a)


def test_baselines_deterministic(setup):
    op, gram, t, pts, _ = setup
    a = baseline_curves(op, None, t, gram, pts, k=2)
    b = baseline_curves(op, None, t, gram, pts, k=2)
    assert a == b
    assert math.isnan(a["stagnation"][-1])
