"""Scikit-learn style estimators wrapping the sparse-rule solvers.

The constraint matrix plays the role of the design matrix X (one column
per candidate node) and the integral values are the targets y; fitting
selects a sparse non-negative coefficient vector, and predict returns the
integral estimates X @ coef for new constraint rows. This makes the
solvers composable with pipelines, cross-validation, and cloning.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .compression import compress
from .dataset import ConstraintSystem, FullRule
from .focuss import FocussConfig
from .focuss import solve as focuss_solve
from .lp import solve_l1

__all__ = ["FocussQuadrature", "LinearProgramQuadrature"]


class _SparseQuadratureBase(RegressorMixin, BaseEstimator):
    """Shared fit plumbing: validate, compress, solve, expose attributes."""

    def _fit_arrays(self, X, y, initial_weights):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        y = check_array(y, dtype=np.float64, ensure_2d=False).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ValueError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if initial_weights is None:
            initial_weights = np.ones(X.shape[1])
        else:
            initial_weights = check_array(
                initial_weights, dtype=np.float64, ensure_2d=False
            ).reshape(-1)
            if initial_weights.shape[0] != X.shape[1]:
                raise ValueError("initial_weights length does not match column count")
            if np.any(initial_weights < 0):
                raise ValueError("initial_weights must be non-negative")
        system = ConstraintSystem(matrix=X, rhs=y)
        compressed = compress(system, self.energy_tol)
        return compressed, initial_weights

    def _store(self, compressed, dense_weights, rule):
        self.weights_ = dense_weights
        self.coef_ = dense_weights
        self.indices_ = rule.indices
        self.residual_norm_ = rule.residual_norm
        self.rank_ = compressed.rank
        self.n_features_in_ = dense_weights.shape[0]
        return self

    def predict(self, X):
        """Integral estimates for new constraint rows."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, expected {self.n_features_in_}"
            )
        return X @ self.weights_


class FocussQuadrature(_SparseQuadratureBase):
    """Sparse non-negative solution of X @ w = y by calibrated reweighting.

    Parameters mirror :class:`~sparsequad.focuss.FocussConfig`, plus
    ``energy_tol`` which controls the SVD compression applied to the
    constraints before solving (0 keeps the full numerical rank).
    """

    def __init__(
        self,
        residual_tol=1e-8,
        exponent=0.75,
        energy_tol=0.0,
        max_iters=300,
        conv_tol=1e-9,
        prune_rel=1e-10,
        svd_cutoff=1e-14,
    ):
        self.residual_tol = residual_tol
        self.exponent = exponent
        self.energy_tol = energy_tol
        self.max_iters = max_iters
        self.conv_tol = conv_tol
        self.prune_rel = prune_rel
        self.svd_cutoff = svd_cutoff

    def fit(self, X, y, initial_weights=None):
        compressed, start = self._fit_arrays(X, y, initial_weights)
        config = FocussConfig(
            residual_tol=self.residual_tol,
            exponent=self.exponent,
            max_iters=self.max_iters,
            conv_tol=self.conv_tol,
            prune_rel=self.prune_rel,
            svd_cutoff=self.svd_cutoff,
        )
        placeholder = FullRule(
            nodes=np.arange(compressed.n_nodes, dtype=float), weights=start
        )
        rule = focuss_solve(compressed, placeholder, config)
        self.n_iter_ = rule.iterations_used
        self.lambda_history_ = list(rule.lambda_history)
        self.saturated_ = rule.saturated
        self.stagnated_ = rule.stagnated
        return self._store(compressed, rule.dense_weights(compressed.n_nodes), rule)


class LinearProgramQuadrature(_SparseQuadratureBase):
    """Sparse non-negative solution of X @ w = y by one-norm minimization.

    The fitted vertex satisfies per-row bounds |X w - y| <= residual_tol
    (after compression to the retained modes).
    """

    def __init__(self, residual_tol=1e-8, energy_tol=0.0):
        self.residual_tol = residual_tol
        self.energy_tol = energy_tol

    def fit(self, X, y, initial_weights=None):
        compressed, start = self._fit_arrays(X, y, initial_weights)
        placeholder = FullRule(
            nodes=np.arange(compressed.n_nodes, dtype=float), weights=start
        )
        rule = solve_l1(compressed, placeholder, self.residual_tol)
        self.row_residual_max_ = rule.row_residual_max
        return self._store(compressed, rule.dense_weights(compressed.n_nodes), rule)
