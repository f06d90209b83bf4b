"""Closed-form ridge regression from voxel vectors to latent vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from freqselect.errors import NumericalError, ValidationError

# condition estimate above which an unpenalized system is refused
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray  # (V, D)
    intercept: np.ndarray  # (D,)
    lam: float

    @property
    def n_voxels(self) -> int:
        return self.weights.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.weights.shape[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return ridge_predict(self, X)


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite values")
    return a


def ridge_fit(X, Z, lam: float = 1.0, center: bool = True) -> RidgeModel:
    """Solve ``(X^T X + lam I) W = X^T Z`` on (optionally) mean-centered data.

    All latent columns share one Cholesky factorization. With ``lam == 0``
    an ill-conditioned Gram matrix raises :class:`NumericalError` instead of
    falling back to a pseudo-inverse.
    """
    X = _as_matrix(X, "X")
    Z = _as_matrix(Z, "Z")
    if X.shape[0] < 1 or X.shape[0] != Z.shape[0]:
        raise ValidationError(f"X has {X.shape[0]} rows but Z has {Z.shape[0]}")
    if not lam >= 0:
        raise ValidationError(f"lambda must be >= 0, got {lam!r}")

    if center:
        x_mean = X.mean(axis=0)
        z_mean = Z.mean(axis=0)
        Xc, Zc = X - x_mean, Z - z_mean
    else:
        x_mean = np.zeros(X.shape[1])
        z_mean = np.zeros(Z.shape[1])
        Xc, Zc = X, Z

    gram = Xc.T @ Xc
    if lam > 0:
        gram[np.diag_indices_from(gram)] += lam
    else:
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise NumericalError(
                f"unpenalized normal equations are singular (condition {cond:.3g})"
            )
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations not positive definite: {exc}") from None
    weights = linalg.cho_solve(factor, Xc.T @ Zc, check_finite=False)
    intercept = z_mean - x_mean @ weights
    return RidgeModel(weights, intercept, float(lam))


def ridge_predict(model: RidgeModel, x) -> np.ndarray:
    """``x @ weights + intercept`` for one voxel vector or a ``(B, V)`` batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_voxels:
        raise ValidationError(f"expected {model.n_voxels} voxels, got {x.shape[-1]}")
    return x @ model.weights + model.intercept


def ridge_cv(
    X,
    Z,
    lambdas=None,
    k: int = 5,
    center: bool = True,
) -> tuple[float, np.ndarray]:
    """Pick ``lambda`` by contiguous k-fold cross-validation on latent MSE.

    Returns the best lambda and the mean validation error for each candidate.
    """
    X = _as_matrix(X, "X")
    Z = _as_matrix(Z, "Z")
    if lambdas is None:
        lambdas = np.logspace(-3, 3, 7)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    n = X.shape[0]
    if not 2 <= k <= n:
        raise ValidationError(f"k must be in [2, {n}], got {k}")
    folds = np.array_split(np.arange(n), k)
    errors = np.zeros(lambdas.size)
    for j, lam in enumerate(lambdas):
        for idx in folds:
            train = np.setdiff1d(np.arange(n), idx)
            model = ridge_fit(X[train], Z[train], lam, center)
            resid = Z[idx] - ridge_predict(model, X[idx])
            errors[j] += np.sum(resid**2) / n
    return float(lambdas[np.argmin(errors)]), errors
