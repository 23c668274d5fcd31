"""Small shared helpers for factorizing and inverting SPD kernel matrices."""

import numpy as np
from scipy.linalg import cho_solve


def cholesky_with_jitter(matrix, base_diagonal, jitters):
    """Lower Cholesky factor of ``matrix + (base_diagonal + jitter) * I``.

    Tries each jitter in order and raises ValueError when none makes the
    matrix positive definite.
    """
    eye = np.eye(matrix.shape[0])
    for jitter in jitters:
        try:
            return np.linalg.cholesky(matrix + (base_diagonal + jitter) * eye)
        except np.linalg.LinAlgError:
            continue
    raise ValueError("kernel matrix not PD")


def spd_inverse(chol_lower):
    """Symmetric inverse from a lower Cholesky factor."""
    n = chol_lower.shape[0]
    inv = cho_solve((chol_lower, True), np.eye(n))
    return 0.5 * (inv + inv.T)
