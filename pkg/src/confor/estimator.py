"""scikit-learn style wrapper around the total-constrained solver."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .distributions import EmpiricalJoint, Marginal, MultivariateNormal
from .exceptions import InfeasibleConstraintError
from .losses import loss_from_spec
from .solver import SolverOptions, solve_total


class ConstrainedForecaster(BaseEstimator):
    """Point forecasts minimizing expected loss subject to a known total.

    ``fit`` takes predictive draws (rows are joint samples, columns series)
    or an already-specified joint law / list of margins.  ``predict`` maps
    each requested total to a forecast vector that sums to it.
    """

    def __init__(self, loss="AD", weights=None, tol=1e-8, max_iter=100, lambda0=None):
        self.loss = loss
        self.weights = weights
        self.tol = tol
        self.max_iter = max_iter
        self.lambda0 = lambda0

    def _loss(self):
        return loss_from_spec({"loss": self.loss, "weights": self.weights})

    def fit(self, X, y=None, sample_weight=None):
        loss = self._loss()
        if isinstance(X, (MultivariateNormal, EmpiricalJoint)):
            source = X
            margins = X.margins()
        elif isinstance(X, (list, tuple)) and X and all(isinstance(m, Marginal) for m in X):
            source = list(X)
            margins = list(X)
        else:
            X = check_array(X, ensure_min_samples=2)
            source = EmpiricalJoint(X, sample_weight)
            margins = source.margins()
        n = len(margins)
        loss.c(n)
        # WAPE needs the joint draws, everything else only the margins
        self.source_ = source if loss.name == "WAPE" else margins
        self.margins_ = margins
        self.n_features_in_ = n
        return self

    def _options(self):
        return SolverOptions(tol=self.tol, max_iter=self.max_iter, lambda0=self.lambda0)

    def predict(self, F):
        """Forecast matrix, one row per total in ``F``.

        Raises :class:`InfeasibleConstraintError` when a total cannot be met.
        """
        check_is_fitted(self, "margins_")
        F = np.atleast_1d(np.asarray(F, dtype=float)).ravel()
        loss, opts = self._loss(), self._options()
        out = np.empty((F.size, self.n_features_in_))
        lams = np.empty(F.size)
        for j, total in enumerate(F):
            res = solve_total(loss, self.source_, total, opts)
            if not res.converged:
                lo, hi = res.attainable if res.attainable is not None else (np.nan, np.nan)
                raise InfeasibleConstraintError(res.message, lo, hi)
            out[j] = res.f_star
            lams[j] = res.lambda_star
        self.lambda_ = lams
        return out

    def score(self, X, F=None):
        """Negative mean realized loss of the forecasts against draws ``X``.

        Each row of ``X`` is scored against the forecast for its own total
        unless ``F`` fixes a single total.
        """
        X = check_array(X)
        loss = self._loss()
        if F is None:
            f = self.predict(X.sum(axis=1))
            per_row = np.array([loss.pointwise(x[None, :], fi)[0] for x, fi in zip(X, f)])
        else:
            per_row = loss.pointwise(X, self.predict(F)[0])
        return -float(per_row.mean())
