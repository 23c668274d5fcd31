"""Inducing-point GP surrogate with O(K^2) per-label posterior updates.

A fixed set of K basis pairs (a feature centroid from k-means, a random
probability vector) carries the posterior. Each new label tightens the
posterior through a rank-one Sherman-Morrison update of the inverted
system matrix, so a selection loop never pays more than O(K^2) to absorb a
label or to predict at a point. At every classifier retrain the caches are
refreshed against the new probabilities and the interval posterior is reset,
so the surrogate restarts exactly at the classifier and then tracks the
labels arriving until the next retrain.
"""

from dataclasses import dataclass

import numpy as np

from .kernel import product_kernel_matrix, squared_distances
from .linalg import cholesky_with_jitter, spd_inverse

KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6
BASIS_JITTERS = (0.0, 1e-10, 1e-8)


def select_basis_inputs(X, n_basis, seed):
    """Basis feature vectors: Lloyd k-means centroids with kmeans++ seeding.

    Runs at most 100 sweeps, stopping early once no center moves more than
    1e-6. Deterministic for a given seed.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= n_basis <= n:
        raise ValueError(f"need 1 <= n_basis <= {n}, got {n_basis}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(X, n_basis, rng)
    for _ in range(KMEANS_MAX_ITER):
        assign = squared_distances(X, centers).argmin(axis=1)
        new_centers = centers.copy()  # empty clusters keep their old center
        for c in range(n_basis):
            members = X[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        movement = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if movement < KMEANS_TOL:
            break
    return centers


def _kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(closest.argmax())  # all remaining points coincide
        chosen.append(idx)
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def sample_basis_outputs(n_classes, n_basis, seed):
    """Uniform draws from the probability simplex (normalized unit
    exponentials), one C-vector per basis point."""
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if n_basis < 1:
        raise ValueError(f"need at least 1 basis point, got {n_basis}")
    rng = np.random.default_rng(seed)
    draws = rng.exponential(1.0, size=(n_basis, n_classes))
    return draws / draws.sum(axis=1, keepdims=True)


@dataclass
class BasisSet:
    """The K inducing pairs plus their Gram matrix and its inverse."""

    inputs: np.ndarray  # (K, d)
    outputs: np.ndarray  # (K, C)
    gram: np.ndarray  # (K, K)
    gram_inv: np.ndarray  # (K, K), symmetric
    include_output_kernel: bool = True


def build_basis(
    pool_x,
    n_basis,
    n_classes,
    params,
    input_seed,
    output_seed,
    include_output_kernel=True,
    inputs=None,
    outputs=None,
):
    """Construct the basis: k-means inputs, simplex outputs, inverted Gram.

    ``inputs``/``outputs`` override the sampled basis point sets; tests use
    this to pin the basis to the labeled training pairs, where the sparse
    predictions must coincide with the exact GP.
    """
    if inputs is None:
        inputs = select_basis_inputs(pool_x, n_basis, input_seed)
    inputs = np.asarray(inputs, dtype=float)
    if outputs is None:
        outputs = sample_basis_outputs(n_classes, len(inputs), output_seed)
    outputs = np.asarray(outputs, dtype=float)
    if len(inputs) != len(outputs):
        raise ValueError("basis inputs and outputs must have equal length")
    gram = product_kernel_matrix(
        inputs, outputs, inputs, outputs, params, include_output_kernel
    )
    chol = cholesky_with_jitter(gram, 0.0, BASIS_JITTERS)
    return BasisSet(
        inputs=inputs,
        outputs=outputs,
        gram=gram,
        gram_inv=spd_inverse(chol),
        include_output_kernel=include_output_kernel,
    )


class SparseSurrogate:
    """Incremental sparse-GP posterior over a labeled/unlabeled pool.

    Single-writer: ``rebuild`` and ``insert_label`` mutate state, everything
    else is a read and may run concurrently between mutations.

    Attributes
    ----------
    kernel_rows : (N, K) basis kernel vector of every pool point under the
        current classifier snapshot.
    diag_correction : (N,) prior variance not explained by the basis,
        ``1 - k_i^T G^{-1} k_i`` clamped to [0, 1].
    system_inv : (K, K) symmetric inverse of the interval system matrix
        (basis Gram plus the weighted scatter of inserted labels).
    cross_term : (K, C) running sum ``k_m (y_m - f(x_m))^T / (lambda_m + noise)``.
    unlabeled_scatter : (K, K) sum of ``k_j k_j^T`` over unlabeled points,
        maintained incrementally and rebuilt from scratch at every rebuild.
    """

    def __init__(self, pool_x, basis, params):
        self.pool_x = np.asarray(pool_x, dtype=float)
        self.basis = basis
        self.params = params
        self.n_points = self.pool_x.shape[0]
        self.n_classes = basis.outputs.shape[1]
        self.kernel_rows = None
        self.diag_correction = None
        self.system_inv = None
        self.cross_term = None
        self.unlabeled_scatter = None
        self.is_unlabeled = None
        self.inserted_since_rebuild = 0

    def rebuild(self, snapshot_probs, unlabeled, labels=None):
        """Refresh all kernel caches against new classifier probabilities and
        reset the interval posterior.

        Parameters
        ----------
        snapshot_probs : (N, C) classifier probabilities for the whole pool.
        unlabeled : boolean mask or index array of currently unlabeled points.
        labels : optional mapping ``index -> one-hot label``; when given, the
            existing labels are re-absorbed in one batch (with residuals
            recomputed against the new snapshot) instead of starting from an
            empty interval.
        """
        probs = np.asarray(snapshot_probs, dtype=float)
        if probs.shape != (self.n_points, self.n_classes):
            raise ValueError(
                f"snapshot probabilities must be {(self.n_points, self.n_classes)},"
                f" got {probs.shape}"
            )
        self.kernel_rows = product_kernel_matrix(
            self.pool_x,
            probs,
            self.basis.inputs,
            self.basis.outputs,
            self.params,
            self.basis.include_output_kernel,
        )
        explained = np.einsum(
            "ij,ij->i", self.kernel_rows @ self.basis.gram_inv, self.kernel_rows
        )
        self.diag_correction = np.clip(1.0 - explained, 0.0, 1.0)

        mask = np.zeros(self.n_points, dtype=bool)
        mask[np.asarray(unlabeled)] = True
        self.is_unlabeled = mask
        rows = self.kernel_rows[mask]
        self.unlabeled_scatter = rows.T @ rows

        if labels:
            idx = np.asarray(sorted(labels), dtype=int)
            k_rows = self.kernel_rows[idx]
            weights = 1.0 / (
                self.diag_correction[idx] + self.params.sigma_sq_noise
            )
            system = self.basis.gram + k_rows.T @ (k_rows * weights[:, None])
            chol = cholesky_with_jitter(system, 0.0, BASIS_JITTERS)
            self.system_inv = spd_inverse(chol)
            residuals = np.asarray(
                [np.asarray(labels[i], dtype=float) - probs[i] for i in idx]
            )
            self.cross_term = (k_rows * weights[:, None]).T @ residuals
            self.inserted_since_rebuild = len(idx)
        else:
            self.system_inv = self.basis.gram_inv.copy()
            self.cross_term = np.zeros((len(self.basis.inputs), self.n_classes))
            self.inserted_since_rebuild = 0

    def unlabeled_indices(self):
        return np.flatnonzero(self.is_unlabeled)

    def predict(self, i):
        """Residual mean (C-vector) and scalar variance at pool index i.

        O(K^2) regardless of how many labels have been absorbed.
        """
        k = self.kernel_rows[i]
        w = self.system_inv @ k
        mean = self.cross_term.T @ w
        variance = self._clip_variance(self.diag_correction[i] + k @ w)
        return mean, float(variance)

    def predict_many(self, indices):
        """Vectorized ``predict``: (m, C) means and (m,) variances."""
        rows = self.kernel_rows[indices]
        W = rows @ self.system_inv
        means = W @ self.cross_term
        variances = self._clip_variance(
            self.diag_correction[indices] + np.einsum("ij,ij->i", W, rows)
        )
        return means, variances

    def residual_means(self, indices):
        """Means only, via the cheaper O(K^2 C + m K C) path."""
        return self.kernel_rows[indices] @ (self.system_inv @ self.cross_term)

    def _clip_variance(self, explained_free):
        noise = self.params.sigma_sq_noise
        return np.clip(explained_free + noise, noise, 1.0 + noise)

    def insert_label(self, i, one_hot, probs_row):
        """Absorb the label for pool index i in O(K^2) + O(KC).

        ``probs_row`` must be the classifier snapshot row the current kernel
        caches were built from; the GP target is ``one_hot - probs_row``.
        """
        if not self.is_unlabeled[i]:
            raise ValueError(f"pool index {i} is already labeled")
        k = self.kernel_rows[i]
        weight = self.diag_correction[i] + self.params.sigma_sq_noise
        a = k / np.sqrt(weight)
        qa = self.system_inv @ a
        self.system_inv -= np.outer(qa, qa) / (1.0 + a @ qa)
        residual = np.asarray(one_hot, dtype=float) - np.asarray(
            probs_row, dtype=float
        )
        self.cross_term += np.outer(k, residual) / weight
        self.unlabeled_scatter -= np.outer(k, k)
        self.is_unlabeled[i] = False
        self.inserted_since_rebuild += 1
