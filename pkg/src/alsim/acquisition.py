"""Candidate-scoring utilities and their accuracy-weighted combination.

Two complementary scores drive selection: the influence utility (total
predictive-variance reduction over the unlabeled pool if a candidate were
labeled, evaluated in O(K^2) per candidate through the rank-one update
identity) and the calibrated-entropy utility (the classifier's class
entropies, multiplicatively rescaled each stage by the surrogate's entropy
ratio). A running accuracy estimate mixes the two.
"""

from dataclasses import dataclass

import numpy as np

RATIO_BOUNDS = (0.1, 10.0)
ENTROPY_FLOOR = 1e-12


def snapshot_entropy(probs):
    """Shannon entropy ``-sum p ln p`` in nats, with ``0 ln 0 := 0``."""
    p = np.asarray(probs, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def entropy_rows(prob_matrix):
    """Row-wise Shannon entropy of a matrix of distributions."""
    p = np.asarray(prob_matrix, dtype=float)
    terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def softmax_rows(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def influence_utility(surrogate, candidates):
    """Variance-reduction score for each candidate.

    For candidate i with basis kernel vector k_i, the total reduction in
    predictive variance over the unlabeled pool is

        C * (w_i^T S w_i) / (lambda_i + noise + k_i^T w_i),
        w_i = system_inv @ k_i,

    where S is the unlabeled scatter matrix. Nonnegative by construction
    (the numerator is a PSD quadratic form); clipped at zero to absorb
    roundoff. O(K^2) per candidate.
    """
    cands = np.asarray(candidates, dtype=int)
    rows = surrogate.kernel_rows[cands]
    W = rows @ surrogate.system_inv
    numer = np.einsum("ij,ij->i", W @ surrogate.unlabeled_scatter, W)
    denom = (
        surrogate.diag_correction[cands]
        + surrogate.params.sigma_sq_noise
        + np.einsum("ij,ij->i", rows, W)
    )
    return np.maximum(surrogate.n_classes * numer / denom, 0.0)


def surrogate_softmax_entropy(surrogate, snapshot_probs, i):
    """Entropy of ``softmax(f(x_i) + residual mean)`` at pool index i."""
    mean, _ = surrogate.predict(i)
    scores = np.asarray(snapshot_probs)[i] + mean
    return snapshot_entropy(softmax_rows(scores[None, :])[0])


def surrogate_softmax_entropies(surrogate, snapshot_probs, indices):
    """Vectorized ``surrogate_softmax_entropy`` over an index array."""
    scores = np.asarray(snapshot_probs)[indices] + surrogate.residual_means(indices)
    return entropy_rows(softmax_rows(scores))


@dataclass
class CalibrationState:
    """Per-point calibrated entropies plus the quantities needed to advance
    them: the previous stage's surrogate entropies and the anchors captured
    at the last retrain.

    Entries live in [0, ln C]. At a retrain stage the calibrated values
    equal the anchors exactly.
    """

    calibrated: np.ndarray  # (N,)
    prev_surrogate: np.ndarray  # (N,)
    anchor: np.ndarray  # (N,)

    @classmethod
    def at_retrain(cls, snapshot_entropies, surrogate_entropies):
        anchors = np.asarray(snapshot_entropies, dtype=float)
        return cls(
            calibrated=anchors.copy(),
            prev_surrogate=np.asarray(surrogate_entropies, dtype=float).copy(),
            anchor=anchors.copy(),
        )


def update_calibration(cal, surrogate, snapshot):
    """Advance calibrated entropies by the surrogate entropy ratio.

    Each unlabeled point's value is multiplied by the ratio of its current
    to previous surrogate softmax entropy; the ratio is clamped to [0.1, 10]
    per step and the denominator floored at 1e-12 so near-zero entropies
    cannot blow the recurrence up. Returns the updated vector, which is the
    uncertainty utility for the stage.
    """
    idx = surrogate.unlabeled_indices()
    current = surrogate_softmax_entropies(surrogate, snapshot.probs, idx)
    ratio = current / np.maximum(cal.prev_surrogate[idx], ENTROPY_FLOOR)
    ratio = np.clip(ratio, *RATIO_BOUNDS)
    max_entropy = np.log(snapshot.probs.shape[1])
    cal.calibrated[idx] = np.clip(cal.calibrated[idx] * ratio, 0.0, max_entropy)
    cal.prev_surrogate[idx] = current
    return cal.calibrated.copy()


def hypothetical_entropy_utility(surrogate, snapshot, i):
    """Expected drop in summed surrogate entropies over the unlabeled pool
    when i is tentatively given each class label, weighted by the
    classifier's class probabilities.

    Ablation-only: each candidate costs C full-pool entropy passes, which is
    what the cheaper calibrated-entropy utility avoids. The tentative
    insertions never touch the surrogate state.
    """
    probs = np.asarray(snapshot.probs, dtype=float)
    n_classes = probs.shape[1]
    if n_classes < 2:
        raise ValueError("single class: hypothetical labels are meaningless")
    idx = surrogate.unlabeled_indices()
    base = surrogate_softmax_entropies(surrogate, probs, idx).sum()

    k = surrogate.kernel_rows[i]
    weight = surrogate.diag_correction[i] + surrogate.params.sigma_sq_noise
    a = k / np.sqrt(weight)
    qa = surrogate.system_inv @ a
    system_new = surrogate.system_inv - np.outer(qa, qa) / (1.0 + a @ qa)

    rows = surrogate.kernel_rows[idx]
    total = 0.0
    for j in range(n_classes):
        residual = -probs[i].copy()
        residual[j] += 1.0
        cross_new = surrogate.cross_term + np.outer(k, residual) / weight
        scores = probs[idx] + rows @ (system_new @ cross_new)
        hypothetical = entropy_rows(softmax_rows(scores)).sum()
        total += probs[i, j] * (base - hypothetical)
    return float(total)


@dataclass
class AccuracyEstimator:
    """Running accuracy over pre-label prediction checks; 0 until the first
    outcome is recorded."""

    correct: int = 0
    total: int = 0

    @property
    def value(self):
        return self.correct / self.total if self.total else 0.0


def record_prediction_outcome(est, predicted_class, true_class):
    """Fold one pre-label prediction check into the running estimate."""
    est.total += 1
    est.correct += int(predicted_class == true_class)
    return est


def normalized(utilities):
    """Utilities divided by their standard deviation over the candidate set;
    an all-equal vector normalizes to zeros."""
    u = np.asarray(utilities, dtype=float)
    std = u.std()
    return u / std if std > 0 else np.zeros_like(u)


def combine_utilities(influence, calibrated, accuracy, mode="accuracy_weighted"):
    """Convex combination of the std-normalized utilities.

    ``accuracy_weighted`` weighs influence by (1 - accuracy) and calibrated
    entropy by accuracy, so selection shifts from exploration to uncertainty
    as the running accuracy estimate improves. ``uniform`` fixes both
    weights at one half.
    """
    u1 = np.asarray(influence, dtype=float)
    u2 = np.asarray(calibrated, dtype=float)
    if u1.shape != u2.shape:
        raise ValueError(f"utility shape mismatch: {u1.shape} vs {u2.shape}")
    if mode == "accuracy_weighted":
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {accuracy!r}")
        w1, w2 = 1.0 - accuracy, accuracy
    elif mode == "uniform":
        w1 = w2 = 0.5
    else:
        raise ValueError(f"unknown combination mode {mode!r}")
    return w1 * normalized(u1) + w2 * normalized(u2)


def select_next(utilities, candidates):
    """The highest-utility candidate index; ties break to the lowest index."""
    u = np.asarray(utilities, dtype=float)
    cands = np.asarray(candidates, dtype=int)
    if len(cands) == 0:
        raise ValueError("no unlabeled candidates left")
    if u.shape != cands.shape:
        raise ValueError("utilities and candidates must align")
    return int(cands[u == u.max()].min())
