import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from conftest import dense_assemble, random_spd
from randpgd.grid import ParameterGrid, uniform_axis
from randpgd.linalg import (
    AffineOperator,
    FactorizationError,
    GramPair,
    affine_assemble,
    as_sparse,
    dual_norm,
    factorize,
    is_symmetric,
    read_mtx,
    read_vector,
    solve_block,
    write_mtx,
    write_vector,
    xnorm,
)
from randpgd.problems import MeshSpec, build_harmonic_bar


def test_as_sparse_is_canonical():
    m = sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    c = as_sparse(m)
    assert c.format == "csc"
    assert c.has_canonical_format
    assert c[0, 1] == 3.0


def test_symmetry_flag_tolerance():
    a = np.array([[2.0, 1.0], [1.0 + 1e-13, 2.0]])
    assert is_symmetric(a)
    assert not is_symmetric(np.array([[2.0, 1.0], [1.1, 2.0]]))


def test_assemble_two_term_at_one():
    grid = ParameterGrid([uniform_axis(0.5, 1.2, 8)], ranges=[(0.5, 1.2)])
    a1 = np.diag([3.0, 4.0])
    a2 = np.array([[1.0, 0.5], [0.5, 1.0]])
    op = AffineOperator([a1, a2], [[None], [np.negative]], grid)
    np.testing.assert_allclose(affine_assemble(op, 1.0).toarray(), a1 - a2, atol=1e-15)


def test_assemble_single_term_identity_coefficient():
    grid = ParameterGrid([uniform_axis(0.0, 1.0, 3)])
    a = np.array([[1.0, 2.0], [0.0, 5.0]])
    op = AffineOperator([a], [[None]], grid)
    for mu in grid.axes[0]:
        np.testing.assert_array_equal(op.assemble(mu).toarray(), a)


def test_assemble_matches_dense_oracle(rng):
    grid = ParameterGrid([uniform_axis(0, 1, 4), uniform_axis(-1, 1, 3)])
    mats = [rng.standard_normal((5, 5)) * (rng.random((5, 5)) < 0.6) for _ in range(3)]
    coef = [[rng.standard_normal(4), None], [None, rng.standard_normal(3)],
            [rng.standard_normal(4), rng.standard_normal(3)]]
    op = AffineOperator(mats, coef, grid)
    for index in [(0, 0), (2, 1), (3, 2)]:
        mu = [grid.axes[0][index[0]], grid.axes[1][index[1]]]
        got = affine_assemble(op, mu).toarray()
        assert np.max(np.abs(got - dense_assemble(op, index))) <= 1e-13


def test_assemble_pattern_is_union(rng):
    grid = ParameterGrid([uniform_axis(0, 1, 2)])
    a = sp.csc_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    b = sp.csc_matrix(np.array([[0.0, 0.0], [2.0, 0.0]]))
    m = AffineOperator([a, b], None, grid).assemble([0.0])
    assert m.nnz == 2


def test_assemble_errors():
    grid = ParameterGrid([uniform_axis(0.0, 1.0, 3)])
    op = AffineOperator([np.eye(2)], [[lambda t: 1 + t]], grid)
    with pytest.raises(ValueError, match="axes"):
        op.assemble([0.5, 0.5])
    with pytest.raises(ValueError, match="outside"):
        op.assemble([2.0])
    np.testing.assert_allclose(op.assemble([0.25]).toarray(), 1.25 * np.eye(2))
    tab = AffineOperator([np.eye(2)], [[np.array([1.0, 2.0, 3.0])]], grid)
    with pytest.raises(ValueError, match="off-grid"):
        tab.assemble([0.25])


def test_operator_shape_checks():
    grid = ParameterGrid([uniform_axis(0.0, 1.0, 3)])
    with pytest.raises(ValueError):
        AffineOperator([np.eye(2), np.eye(3)], None, grid)
    with pytest.raises(ValueError):
        AffineOperator([np.eye(2)], [[np.ones(4)]], grid)


def test_factorize_identity():
    f = factorize(sp.identity(4), "cholesky")
    b = np.arange(4.0)
    np.testing.assert_array_equal(f.solve(b), b)


def test_cholesky_hand_example():
    f = factorize(np.array([[4.0, 1.0], [1.0, 3.0]]), "cholesky")
    np.testing.assert_allclose(f.solve(np.array([1.0, 2.0])), [1 / 11, 7 / 11], rtol=1e-14)


def test_fem_stiffness_residual():
    mesh = MeshSpec(nx=10, ny=5)
    op, gram = build_harmonic_bar(mesh)
    a = op.matrices[0]
    f = factorize(a, "cholesky")
    b = np.random.default_rng(0).standard_normal(op.n)
    x = f.solve(b)
    assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) <= 1e-10


def test_cholesky_rejects_indefinite():
    with pytest.raises(FactorizationError):
        factorize(np.array([[1.0, 2.0], [2.0, 1.0]]), "cholesky")
    with pytest.raises(FactorizationError):
        factorize(np.array([[1.0, 1.0], [1.0, 1.0]]), "lu")


def test_sqrt_factor(rng):
    a = random_spd(rng, 12)
    u = factorize(a, "cholesky").sqrt_factor().toarray()
    np.testing.assert_allclose(u.T @ u, a, atol=1e-12)


def test_solve_block_single_column(rng):
    a = random_spd(rng, 6)
    f = factorize(a)
    b = rng.standard_normal(6)
    np.testing.assert_allclose(solve_block(f, b[:, None])[:, 0], f.solve(b), atol=0)


def test_solve_block_identity_columns():
    f = factorize(sp.identity(3))
    np.testing.assert_array_equal(solve_block(f, np.eye(3)), np.eye(3))


def test_solve_block_matches_loop(rng):
    a = rng.standard_normal((30, 30)) + 30 * np.eye(30)
    f = factorize(a)
    b = rng.standard_normal((30, 8))
    loop = np.column_stack([f.solve(b[:, j]) for j in range(8)])
    assert np.max(np.abs(solve_block(f, b) - loop)) <= 1e-13
    with pytest.raises(ValueError):
        solve_block(f, np.ones((29, 2)))


def test_norms_of_zero(small_gram):
    assert xnorm(np.zeros(8), small_gram) == 0
    assert dual_norm(np.zeros(8), small_gram) == 0


def test_norms_with_identity(rng):
    g = GramPair(sp.identity(5))
    v = rng.standard_normal(5)
    assert xnorm(v, g) == pytest.approx(np.linalg.norm(v), rel=1e-14)
    assert dual_norm(v, g) == pytest.approx(np.linalg.norm(v), rel=1e-14)


def test_norms_spectral_oracle(rng):
    r = random_spd(rng, 10)
    g = GramPair(sp.csc_matrix(r))
    lam, vec = sla.eigh(r)
    for _ in range(5):
        v = rng.standard_normal(10)
        c = vec.T @ v
        assert xnorm(v, g) == pytest.approx(np.sqrt(np.sum(lam * c * c)), rel=1e-10)
        assert dual_norm(v, g) == pytest.approx(np.sqrt(np.sum(c * c / lam)), rel=1e-10)
    with pytest.raises(ValueError):
        xnorm(np.ones(3), g)


def test_norm_homogeneity(rng, small_gram):
    v = rng.standard_normal(8)
    assert xnorm(-3.0 * v, small_gram) == pytest.approx(3.0 * xnorm(v, small_gram), rel=1e-15)


def test_dual_norm_is_sup_over_sphere(rng):
    r = random_spd(rng, 4)
    g = GramPair(sp.csc_matrix(r))
    v = rng.standard_normal(4)
    w = rng.standard_normal((4, 200_000))
    ratio = (w.T @ v) ** 2 / np.sum(w * (r @ w), axis=0)
    assert np.sqrt(ratio.max()) == pytest.approx(dual_norm(v, g), rel=1e-2)
    assert np.sqrt(ratio.max()) <= dual_norm(v, g) * (1 + 1e-12)


def test_duality_inequality(rng, small_gram):
    for _ in range(20):
        w, v = rng.standard_normal(8), rng.standard_normal(8)
        assert abs(w @ v) <= xnorm(w, small_gram) * dual_norm(v, small_gram) + 1e-10


def test_gram_rejects_non_spd():
    with pytest.raises(ValueError):
        GramPair(sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 1.0]])))


def test_matrix_market_round_trip(tmp_path, rng):
    a = sp.random(7, 7, density=0.4, random_state=1) + sp.identity(7)
    write_mtx(tmp_path / "a.mtx", a)
    np.testing.assert_array_equal(read_mtx(tmp_path / "a.mtx").toarray(), a.toarray())
    v = rng.standard_normal(7)
    write_vector(tmp_path / "v.txt", v)
    np.testing.assert_array_equal(read_vector(tmp_path / "v.txt"), v)
