"""Estimator-style wrappers around the functional API.

The "training data" of every estimator is a parametrized problem: ``fit``
takes an :class:`~randpgd.linalg.AffineOperator` (carrying its right-hand
side) and ``predict`` takes parameter values on its grid, one row per
sample.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_gram, check_operator, check_parameters
from .certify import IntertwinedConfig, intertwined_solve
from .grid import PointSet
from .pgd import FORMULATIONS, CanonicalTensor, GreedyConfig, dual_greedy_solve, greedy_solve
from .pgd.greedy import SUMS
from .sketch import SigmaSpec, draw_sketch, fast_estimators, sample_size

__all__ = ["PGDRegressor", "RandomizedErrorEstimator", "IntertwinedCertifier"]


def _solutions(tensor, index):
    out = tensor.evaluate_points(PointSet(tensor.grid, index))
    return out[:, :, 0] if tensor.k_cols == 1 else out


class PGDRegressor(RegressorMixin, BaseEstimator):
    """Greedy rank-one PGD approximation of ``u(mu)``.

    Parameters
    ----------
    formulation : {"min_residual", "galerkin"}
    max_rank : int
    als_sweeps : int
    als_stagnation_tol : float
    seed : int
    max_restarts : int
    n_points : int, optional
    sums : {"auto", "points", "grid"}

    Attributes
    ----------
    tensor_ : CanonicalTensor
    objective_history_ : ndarray
    n_features_in_ : int
        Number of parameter axes.
    """

    def __init__(self, formulation="min_residual", max_rank=10, als_sweeps=4,
                 als_stagnation_tol=1e-3, seed=0, max_restarts=3, n_points=None, sums="auto"):
        self.formulation = formulation
        self.max_rank = max_rank
        self.als_sweeps = als_sweeps
        self.als_stagnation_tol = als_stagnation_tol
        self.seed = seed
        self.max_restarts = max_restarts
        self.n_points = n_points
        self.sums = sums

    def _config(self):
        check_choice(self.formulation, "formulation", FORMULATIONS)
        check_choice(self.sums, "sums", SUMS)
        return GreedyConfig(
            self.formulation, self.max_rank, self.als_sweeps, self.als_stagnation_tol,
            self.seed, self.max_restarts, self.n_points, sums=self.sums,
        )

    def fit(self, X, y=None):
        """Build the approximation of problem ``X`` (``y``: optional right-hand side)."""
        op = check_operator(X)
        self.tensor_ = greedy_solve(op, y, self._config())
        self.objective_history_ = np.asarray(self.tensor_.meta["objective_history"])
        self.n_features_in_ = op.p
        return self

    def predict(self, X):
        """Approximate solutions ``(n_samples, n)`` at grid parameter rows ``X``."""
        check_is_fitted(self, "tensor_")
        return _solutions(self.tensor_, check_parameters(X, self.tensor_.grid))

    def score(self, X, y, sample_weight=None):
        """One minus the relative RMS Euclidean error against reference solutions ``y``."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=float).reshape(pred.shape)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, float)
        num = np.sum(w * np.sum((pred - y) ** 2, axis=1))
        den = np.sum(w * np.sum(y**2, axis=1))
        return 1.0 - float(np.sqrt(num / den))


class RandomizedErrorEstimator(BaseEstimator):
    """Fast randomized error estimates of a given approximation.

    ``fit`` draws ``k`` Gaussian vectors with covariance ``R_X`` (or the
    identity without Gram matrix) and builds a rank-``l`` dual PGD; the dual
    does not depend on the approximation, so one fitted estimator serves any
    number of approximations.

    Parameters
    ----------
    k : int, optional
        Sketch size; default from the relative union bound with ``delta``, ``w``.
    l : int
        Dual rank.
    delta, w : float
    formulation : {"min_residual", "galerkin"}
    als_sweeps : int
    als_stagnation_tol : float
    seed : int
        Sketch and dual ALS seed.
    """

    def __init__(self, k=None, l=8, delta=1e-2, w=4.0, formulation="min_residual",
                 als_sweeps=8, als_stagnation_tol=1e-4, seed=0):
        self.k = k
        self.l = l
        self.delta = delta
        self.w = w
        self.formulation = formulation
        self.als_sweeps = als_sweeps
        self.als_stagnation_tol = als_stagnation_tol
        self.seed = seed

    def fit(self, X, y=None, gram=None):
        """Sketch and dual for problem ``X`` (``gram``: ``GramPair`` for ``Sigma = R_X``)."""
        op = check_operator(X)
        gram = check_gram(gram, op.n)
        check_choice(self.formulation, "formulation", FORMULATIONS)
        k = self.k or sample_size(self.delta, self.w, op.grid.cardinality, "relative")
        sigma = SigmaSpec.identity(op.n) if gram is None else SigmaSpec.gram(gram)
        self.sketch_ = draw_sketch(sigma, k, self.seed)
        cfg = GreedyConfig(self.formulation, self.l, self.als_sweeps, self.als_stagnation_tol,
                           self.seed)
        self.dual_ = dual_greedy_solve(op.transpose(), self.sketch_.z_block, cfg)
        self.operator_ = op
        self.n_features_in_ = op.p
        return self

    def estimate(self, approximation, X=None):
        """:class:`EstimateBundle` at grid rows ``X`` (all grid points when omitted)."""
        check_is_fitted(self, "dual_")
        u = approximation.tensor_ if isinstance(approximation, PGDRegressor) else approximation
        if not isinstance(u, CanonicalTensor):
            raise TypeError("approximation must be a CanonicalTensor or a fitted PGDRegressor")
        grid = self.operator_.grid
        pts = grid.full() if X is None else PointSet(grid, check_parameters(X, grid))
        return fast_estimators(self.operator_, None, u, self.dual_, self.sketch_, pts)

    def predict(self, X, approximation):
        """Relative error estimates ``(n_samples,)`` of ``approximation`` at rows ``X``."""
        return self.estimate(approximation, X).delta_rel


class IntertwinedCertifier(BaseEstimator):
    """Primal PGD with a dual enriched until its estimate can be trusted.

    Parameters mirror :class:`~randpgd.certify.IntertwinedConfig`; ``k`` fixes
    the sketch size instead of the union bound.

    Attributes
    ----------
    report_ : CertificateReport
    tensor_ : CanonicalTensor
    estimate_ : float
        Final relative RMS estimate.
    """

    def __init__(self, tol=1e-2, delta=1e-2, m_max=20, w=4.0, alpha=2.0, k_lag=6, k=None,
                 l_max=None, increment="minus", formulation="min_residual", seed=0):
        self.tol = tol
        self.delta = delta
        self.m_max = m_max
        self.w = w
        self.alpha = alpha
        self.k_lag = k_lag
        self.k = k
        self.l_max = l_max
        self.increment = increment
        self.formulation = formulation
        self.seed = seed

    def fit(self, X, y=None, gram=None):
        op = check_operator(X)
        gram = check_gram(gram, op.n)
        cfg = IntertwinedConfig(
            tol=self.tol, delta=self.delta, m_max=self.m_max, w=self.w, alpha=self.alpha,
            k_lag=self.k_lag, increment=self.increment, primal_formulation=self.formulation,
            dual_formulation=self.formulation, k_sketch=self.k, l_max=self.l_max, seed=self.seed,
        )
        sigma = SigmaSpec.identity(op.n) if gram is None else SigmaSpec.gram(gram)
        self.report_ = intertwined_solve(op, y, sigma, cfg)
        self.tensor_ = self.report_.primal
        self.estimate_ = self.report_.estimate
        self.n_features_in_ = op.p
        return self

    def predict(self, X):
        check_is_fitted(self, "tensor_")
        return _solutions(self.tensor_, check_parameters(X, self.tensor_.grid))
