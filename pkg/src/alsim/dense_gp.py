"""Exact Gaussian-process regression on classifier residuals.

The GP models ``y - f(x)`` with an i.i.d. Gaussian likelihood shared across
classes, so the posterior mean is a per-class correction added onto the
classifier's probabilities and the predictive variance is a single scalar
per query. Fitting costs O(t^3) in the number of labeled points; this model
is the small-instance reference the sparse approximation is checked against.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernel import KernelParams, product_kernel_matrix
from .linalg import cholesky_with_jitter

CHOLESKY_RETRY_JITTER = 1e-8


@dataclass
class DenseGPModel:
    """Fitted exact GP: training pairs, residual targets, and the Cholesky
    factor of the regularized Gram matrix."""

    train_x: np.ndarray  # (t, d)
    train_fx: np.ndarray  # (t, C)
    residual_targets: np.ndarray  # (t, C), rows y_i - f(x_i)
    chol_lower: np.ndarray  # (t, t)
    solved_targets: np.ndarray  # (t, C), (K + noise I)^{-1} residuals
    params: KernelParams


def fit_dense(labeled, params):
    """Fit the exact GP to triples ``(x, f(x), y)`` with one-hot labels y.

    The regularized Gram matrix is factorized once; if the factorization
    fails at the configured noise level it is retried once with an extra
    1e-8 jitter before giving up (duplicate points with near-zero noise are
    the usual culprit).
    """
    triples = list(labeled)
    if not triples:
        raise ValueError("need at least one labeled point")
    X = np.asarray([np.asarray(x, dtype=float) for x, _, _ in triples])
    FX = np.asarray([np.asarray(fx, dtype=float) for _, fx, _ in triples])
    Y = np.asarray([np.asarray(y, dtype=float) for _, _, y in triples])
    residuals = Y - FX
    gram = product_kernel_matrix(X, FX, X, FX, params)
    chol = cholesky_with_jitter(
        gram, params.sigma_sq_noise, (0.0, CHOLESKY_RETRY_JITTER)
    )
    solved = cho_solve((chol, True), residuals)
    return DenseGPModel(
        train_x=X,
        train_fx=FX,
        residual_targets=residuals,
        chol_lower=chol,
        solved_targets=solved,
        params=params,
    )


def predict_dense(model, x, fx):
    """Residual mean (C-vector) and scalar variance at a query pair.

    The mean lives on the residual scale; callers add ``fx`` back to obtain
    surrogate class scores. The variance is isotropic across classes and
    clamped to [0, 1] to absorb roundoff.
    """
    k = product_kernel_matrix(
        np.atleast_2d(np.asarray(x, dtype=float)),
        np.atleast_2d(np.asarray(fx, dtype=float)),
        model.train_x,
        model.train_fx,
        model.params,
    )[0]
    mean = k @ model.solved_targets
    v = solve_triangular(model.chol_lower, k, lower=True)
    variance = float(np.clip(1.0 - v @ v, 0.0, 1.0))
    return mean, variance
