"""Confounder importance from an outcome regression and a treatment regression.

Both models are fitted on the raw covariates (discrete columns enter as their
integer codes) with an intercept.  Each coefficient vector is scaled by its
largest absolute entry and the importance of a covariate is the average of
its two scaled absolute coefficients.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
from scipy.special import expit

from timatch.dataset import Dataset

logger = logging.getLogger(__name__)


class CollinearityWarning(UserWarning):
    pass


class SeparationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ImportanceVector:
    theta_star: np.ndarray
    beta_hat: np.ndarray
    alpha_hat: np.ndarray
    order: np.ndarray

    def to_dict(self, column_names) -> dict:
        rank = np.empty(len(self.order), dtype=int)
        rank[self.order] = np.arange(len(self.order))
        return {
            "columns": [
                {
                    "name": name,
                    "beta_hat": float(self.beta_hat[j]),
                    "alpha_hat": float(self.alpha_hat[j]),
                    "theta_star": float(self.theta_star[j]),
                    "rank": int(rank[j]),
                }
                for j, name in enumerate(column_names)
            ],
            "order": [int(j) for j in self.order],
        }


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(X)), X])


def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares with intercept; returns ``[intercept, coef...]``.

    Rank-deficient designs get the minimum-norm solution and a
    :class:`CollinearityWarning` naming the dependent columns.
    """
    A = _design(X)
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        warnings.warn(
            f"design matrix is rank deficient (rank {rank} < {A.shape[1]}); "
            f"dependent columns: {_dependent_columns(A)}",
            CollinearityWarning,
            stacklevel=2,
        )
    return coef


def _dependent_columns(A: np.ndarray) -> list:
    """Covariate indices (intercept excluded) that add no rank when appended in order."""
    dependent = []
    kept = A[:, :1]
    for j in range(1, A.shape[1]):
        trial = np.column_stack([kept, A[:, j]])
        if np.linalg.matrix_rank(trial) > np.linalg.matrix_rank(kept):
            kept = trial
        else:
            dependent.append(j - 1)
    return dependent


def logistic_irls(
    X: np.ndarray,
    t: np.ndarray,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> np.ndarray:
    """Penalized logistic regression by iteratively reweighted least squares.

    Minimizes ``sum(-t*eta + log(1 + exp(eta))) + ridge/2 * ||coef[1:]||^2``
    with ``eta = coef[0] + X @ coef[1:]``; the intercept is unpenalized.
    Newton steps are halved until the objective does not increase.

    Returns:
        ``[intercept, coef...]``.
    """
    A = _design(X)
    t = np.asarray(t, dtype=float)
    p = A.shape[1]
    pen = np.full(p, ridge)
    pen[0] = 0.0
    coef = np.zeros(p)

    def objective(c):
        eta = A @ c
        return float(np.sum(np.logaddexp(0.0, eta) - t * eta) + 0.5 * np.sum(pen * c * c))

    obj = objective(coef)
    converged = False
    for it in range(max_iter):
        mu = expit(A @ coef)
        w = mu * (1.0 - mu)
        grad = A.T @ (t - mu) - pen * coef
        H = (A * w[:, None]).T @ A + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(50):
            cand = coef + scale * step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-12 * max(1.0, abs(obj)):
                break
            scale *= 0.5
        delta = np.max(np.abs(cand - coef))
        coef, obj = cand, cand_obj
        if delta < tol:
            converged = True
            break
    eta = A @ coef
    t_bool = t > 0.5
    separated = eta[t_bool].min() >= eta[~t_bool].max() or eta[t_bool].max() <= eta[~t_bool].min()
    if separated:
        warnings.warn(
            "treatment is perfectly separated by the covariates; "
            "returning the ridge-penalized solution",
            SeparationWarning,
            stacklevel=2,
        )
    elif not converged:
        logger.warning("IRLS did not converge in %d iterations", max_iter)
    return coef


def logistic_gradient(X: np.ndarray, t: np.ndarray, coef: np.ndarray, ridge: float = 1e-6) -> np.ndarray:
    """Gradient of the penalized log-likelihood (zero at the optimum)."""
    A = _design(X)
    pen = np.full(A.shape[1], ridge)
    pen[0] = 0.0
    return A.T @ (np.asarray(t, dtype=float) - expit(A @ coef)) - pen * coef


def fit_outcome_model(ds: Dataset, adjust_for_treatment: bool = True) -> np.ndarray:
    """OLS coefficients of Y on the covariates, intercept dropped.

    With ``adjust_for_treatment`` the treatment indicator enters the design as
    a nuisance regressor, so covariates correlated with T do not absorb the
    treatment effect. Its coefficient is not returned.
    """
    extra = 1 if adjust_for_treatment else 0
    if ds.n <= ds.k + 1 + extra:
        raise ValueError(f"outcome model needs n > {ds.k + 1 + extra} (n={ds.n}, k={ds.k})")
    if adjust_for_treatment:
        return ols(np.column_stack([ds.covariates, ds.treatment]), ds.outcome)[1:-1]
    return ols(ds.covariates, ds.outcome)[1:]


def fit_treatment_model(
    ds: Dataset, ridge: float = 1e-6, tol: float = 1e-8, max_iter: int = 100
) -> np.ndarray:
    """Logistic-regression coefficients of T on the covariates, intercept dropped."""
    return logistic_irls(ds.covariates, ds.treatment, ridge=ridge, tol=tol, max_iter=max_iter)[1:]


def _linf_normalize(v: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(v)) if v.size else 0.0
    if m == 0.0:
        return np.zeros_like(v, dtype=float)
    return v / m


def importance_order(theta: np.ndarray) -> np.ndarray:
    """Indices sorted by descending importance; ties by ascending column index."""
    theta = np.asarray(theta, dtype=float)
    return np.lexsort((np.arange(theta.size), -theta))


def compute_theta_star(beta_hat, alpha_hat) -> ImportanceVector:
    beta_hat = np.asarray(beta_hat, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    if beta_hat.shape != alpha_hat.shape:
        raise ValueError("beta_hat and alpha_hat must have the same length")
    theta = (np.abs(_linf_normalize(beta_hat)) + np.abs(_linf_normalize(alpha_hat))) / 2.0
    return ImportanceVector(
        theta_star=theta,
        beta_hat=beta_hat,
        alpha_hat=alpha_hat,
        order=importance_order(theta),
    )


def regression_importance(
    ds: Dataset,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
    adjust_for_treatment: bool = True,
) -> ImportanceVector:
    beta = fit_outcome_model(ds, adjust_for_treatment)
    alpha = fit_treatment_model(ds, ridge=ridge, tol=tol, max_iter=max_iter)
    return compute_theta_star(beta, alpha)


# Extension point: other importance estimators (tree-based, model reliance)
# register here with the same (Dataset, **options) -> ImportanceVector shape.
IMPORTANCE_METHODS: Dict[str, Callable[..., ImportanceVector]] = {
    "regression": regression_importance,
}


def register_importance_method(name: str):
    def deco(fn):
        IMPORTANCE_METHODS[name] = fn
        return fn

    return deco


def compute_importance(ds: Dataset, method: str = "regression", **options) -> ImportanceVector:
    try:
        fn = IMPORTANCE_METHODS[method]
    except KeyError:
        raise ValueError(
            f"unknown importance method {method!r}; known: {sorted(IMPORTANCE_METHODS)}"
        ) from None
    return fn(ds, **options)
