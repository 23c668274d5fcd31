"""Gaussian product kernel over (feature, class-probability) pairs.

The covariance couples an RBF kernel on raw features with an RBF kernel on
the classifier's probability outputs, so two points stay decorrelated when
the classifier treats them differently even if their features are close.
Both bandwidths enter squared: ``exp(-d^2 / sigma^2)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

DEFAULT_NOISE_VARIANCE = 1e-10
MAX_BANDWIDTH_PAIRS = 100_000


@dataclass(frozen=True)
class KernelParams:
    """Bandwidths and likelihood noise variance for the product kernel.

    Parameters
    ----------
    sigma_x : float
        Input bandwidth, in feature-space distance units.
    sigma_f : float
        Output bandwidth, in probability-simplex distance units.
    sigma_sq_noise : float
        Observation noise variance added to the kernel diagonal.
    """

    sigma_x: float
    sigma_f: float
    sigma_sq_noise: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self):
        for name in ("sigma_x", "sigma_f", "sigma_sq_noise"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")


def default_params(X, n_classes, noise_variance=DEFAULT_NOISE_VARIANCE, seed=0):
    """Data-driven defaults: sigma_x from mean pairwise distance, sigma_f = C."""
    return KernelParams(
        sigma_x=estimate_sigma_x(X, seed=seed),
        sigma_f=float(n_classes),
        sigma_sq_noise=noise_variance,
    )


def gaussian_base(a, a_prime, b):
    """``exp(-||a - a'||^2 / b)`` for equal-length vectors and ``b > 0``."""
    a = np.asarray(a, dtype=float)
    a_prime = np.asarray(a_prime, dtype=float)
    if a.shape != a_prime.shape:
        raise ValueError(f"vector shape mismatch: {a.shape} vs {a_prime.shape}")
    if not b > 0:
        raise ValueError(f"kernel denominator must be positive, got {b!r}")
    diff = a - a_prime
    return float(np.exp(-np.dot(diff, diff) / b))


def product_kernel(x, x_prime, fx, fx_prime, params):
    """Input RBF times output RBF: ``k_x(x, x') * k_f(f(x), f(x'))``.

    Symmetric in its argument pairs and bounded in (0, 1], with value 1
    exactly when both pairs coincide.
    """
    return gaussian_base(x, x_prime, params.sigma_x**2) * gaussian_base(
        fx, fx_prime, params.sigma_f**2
    )


def squared_distances(A, B):
    """All-pairs squared Euclidean distances between rows of A and rows of B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    a2 = np.einsum("ij,ij->i", A, A)[:, None]
    b2 = np.einsum("ij,ij->i", B, B)[None, :]
    d2 = a2 + b2 - 2.0 * (A @ B.T)
    # roundoff can leave tiny negatives for near-identical rows
    return np.maximum(d2, 0.0)


def product_kernel_matrix(X, FX, U, V, params, include_output_kernel=True):
    """Kernel matrix between row pairs ``(X[i], FX[i])`` and ``(U[j], V[j])``.

    With ``include_output_kernel=False`` only the input RBF is evaluated,
    which gives the plain feature-space kernel used as an ablation baseline.
    """
    K = np.exp(-squared_distances(X, U) / params.sigma_x**2)
    if include_output_kernel:
        K *= np.exp(-squared_distances(FX, V) / params.sigma_f**2)
    return K


def estimate_sigma_x(X, max_pairs=MAX_BANDWIDTH_PAIRS, seed=0):
    """Half the average Euclidean distance between distinct rows of X.

    Exact when the number of distinct pairs is at most ``max_pairs``;
    otherwise the mean is taken over ``max_pairs`` pairs sampled uniformly
    with replacement (deterministic for a given seed).

    Raises
    ------
    ValueError
        If X has fewer than 2 rows, or all rows are identical (which would
        produce a zero bandwidth).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("degenerate dataset: need at least 2 rows")
    n = X.shape[0]
    if n * (n - 1) // 2 <= max_pairs:
        mean = float(pdist(X).mean())
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n - 1, size=max_pairs)
        j = np.where(j >= i, j + 1, j)  # uniform over j != i
        mean = float(np.sqrt(((X[i] - X[j]) ** 2).sum(axis=1)).mean())
    if mean == 0.0:
        raise ValueError("zero bandwidth: all rows of X are identical")
    return 0.5 * mean
