"""Estimator-style front end for covariate screening.

``NoiseSignificance`` wraps the two-step selection strategy in the
familiar fit/transform shape: ``fit(X, y)`` decides which covariates
beat noise, ``transform(X)`` keeps those columns, and ``predict(X)``
applies the coefficients refitted on the chosen subset.  The class
follows the scikit-learn conventions — constructor stores
hyper-parameters verbatim, ``get_params``/``set_params``, fitted
attributes carry a trailing underscore — without importing scikit-learn.
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import UsageError
from .fitting import fit_objective
from .model import Dataset, ObjectiveSpec, subset_members
from .selection import choose_functional
from .validation import as_matrix, as_vector

__all__ = ["NoiseSignificance"]


class NoiseSignificance:
    """Select covariates whose contribution noise cannot imitate.

    Parameters
    ----------
    objective : "l1", "l2", "huber:<c>" or an ObjectiveSpec.
    alpha : significance level for the calibrated cut-offs.
    method : "raw", "gamma" or "asymptotic" P-values.
    n_sims : noise replicates per P-value.
    noise : noise kind for the substituted columns.
    cutoff : "chisq"/"auto", a scalar p0, or a CutoffTable.
    cutoff_sims : replicates for the chi-squared cut-off approximation.
    seed, threads : reproducibility and worker cap.
    feature_names : optional covariate names (default x1..xk).

    Fitted attributes: ``support_`` (boolean mask of kept covariates),
    ``chosen_`` (subset code or None), ``coef_``/``intercept_`` (refit on
    the chosen subset, zeros elsewhere), ``selection_`` (the full
    outcome), ``pvalues_`` (subset code -> P-value).
    """

    def __init__(self, objective="l1", alpha: float = 0.05,
                 method: str = "gamma", n_sims: int = 1000,
                 noise: str = "gaussian", cutoff="chisq",
                 cutoff_sims: int = 100_000, seed: int = 0,
                 threads: int | None = 1, feature_names=None):
        self.objective = objective
        self.alpha = alpha
        self.method = method
        self.n_sims = n_sims
        self.noise = noise
        self.cutoff = cutoff
        self.cutoff_sims = cutoff_sims
        self.seed = seed
        self.threads = threads
        self.feature_names = feature_names

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name in signature.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "NoiseSignificance":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise UsageError(
                    f"unknown parameter {key!r}; valid parameters are "
                    f"{', '.join(sorted(valid))}")
            setattr(self, key, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={getattr(self, k)!r}"
                         for k in self._param_names())
        return f"{type(self).__name__}({args})"

    # -- fitting ------------------------------------------------------

    def _objective_spec(self) -> ObjectiveSpec:
        if isinstance(self.objective, ObjectiveSpec):
            return self.objective
        return ObjectiveSpec.parse(str(self.objective))

    def _as_dataset(self, X, y) -> Dataset:
        X = as_matrix(X, "X")
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
        else:
            names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
        return Dataset(as_vector(y, "y"), X, names)

    def fit(self, X, y) -> "NoiseSignificance":
        d = self._as_dataset(X, y)
        obj = self._objective_spec()
        outcome = choose_functional(
            d, obj, self.alpha, self.cutoff, self.method, self.n_sims,
            self.noise, self.seed, self.threads, self.cutoff_sims)
        e = outcome.chosen if outcome.chosen is not None else 0
        kept = subset_members(e, d.k)
        support = np.zeros(d.k, bool)
        support[kept] = True
        refit = fit_objective(d, e, obj)
        coef = np.zeros(d.k)
        coef[kept] = refit.beta[1:]

        self.n_features_in_ = d.k
        self.feature_names_in_ = np.asarray(d.names, dtype=object)
        self.selection_ = outcome
        self.chosen_ = outcome.chosen
        self.support_ = support
        self.coef_ = coef
        self.intercept_ = float(refit.beta[0])
        self.pvalues_ = {r.subset: r.best() for r in outcome.reports}
        return self

    # -- fitted behaviour ---------------------------------------------

    def _check_fitted(self) -> None:
        if not hasattr(self, "support_"):
            raise UsageError("this estimator is not fitted yet; "
                             "call fit(X, y) first")

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.n_features_in_:
            raise UsageError(f"X has {X.shape[1]} columns; the estimator "
                             f"was fitted with {self.n_features_in_}")
        return X

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = self._check_width(as_matrix(X, "X"))
        return X[:, self.support_]

    def fit_transform(self, X, y) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = self._check_width(as_matrix(X, "X"))
        return self.intercept_ + X @ self.coef_

    def get_support(self, indices: bool = False) -> np.ndarray:
        self._check_fitted()
        return np.flatnonzero(self.support_) if indices else self.support_.copy()
