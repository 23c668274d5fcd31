"""Minibatch-SGD softmax classifiers and the probability snapshots they feed
to the surrogate.

The built-in learner is a softmax-linear model or a small ReLU MLP on raw
features, trained from scratch at each retrain with a step-decayed learning
rate. Any outside model can stand in through precomputed per-stage
probability files (``ExternalPredictions``).
"""

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import entropy_rows, softmax_rows


@dataclass(frozen=True)
class LearnerConfig:
    architecture: str = "softmax_linear"  # or "mlp"
    hidden: tuple = ()
    learning_rate: float = 0.01
    lr_decay: float = 0.1
    decay_every: int = 10
    batch_size: int = 30
    epochs: int = 100
    seed: int = 0
    warm_start: bool = False

    def __post_init__(self):
        if self.architecture not in ("softmax_linear", "mlp"):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.architecture == "mlp" and not self.hidden:
            raise ValueError("mlp architecture needs at least one hidden width")
        for name in ("learning_rate", "lr_decay", "decay_every", "batch_size", "epochs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class LearnerModel:
    weights: list  # per-layer (fan_in, fan_out) matrices
    biases: list
    config: LearnerConfig
    n_classes: int


@dataclass(frozen=True)
class LearnerSnapshot:
    """Pool-wide class probabilities and entropies, frozen at a retrain.

    ``stage`` records the label count the model was trained on.
    """

    probs: np.ndarray  # (N, C)
    entropies: np.ndarray  # (N,)
    stage: int


def _layer_sizes(config, n_features, n_classes):
    hidden = tuple(config.hidden) if config.architecture == "mlp" else ()
    return [n_features, *hidden, n_classes]


def _init_model(config, n_features, n_classes, rng):
    sizes = _layer_sizes(config, n_features, n_classes)
    weights, biases = [], []
    n_layers = len(sizes) - 1
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if layer == n_layers - 1:
            # zero-init output layer: uniform predictions at step 0, and the
            # softmax-linear model starts at the convex problem's natural origin
            weights.append(np.zeros((fan_in, fan_out)))
        else:
            weights.append(
                rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_in, fan_out))
            )
        biases.append(np.zeros(fan_out))
    return LearnerModel(weights=weights, biases=biases, config=config,
                        n_classes=n_classes)


def _forward(model, X):
    """All layer activations; the last entry is the softmax output."""
    activations = [X]
    h = X
    for layer, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = z if layer == len(model.weights) - 1 else np.maximum(z, 0.0)
        activations.append(h)
    activations[-1] = softmax_rows(activations[-1])
    return activations


def train(features, targets_one_hot, config, init_model=None):
    """Cross-entropy SGD fit; deterministic for a given config seed.

    ``init_model`` warm-starts from an existing model's parameters instead
    of a fresh random initialization.
    """
    X = np.asarray(features, dtype=float)
    Y = np.asarray(targets_one_hot, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("empty training set")
    if len(X) != len(Y):
        raise ValueError("features and targets must align")
    n, _ = X.shape
    rng = np.random.default_rng(config.seed)
    if init_model is not None:
        model = LearnerModel(
            weights=[W.copy() for W in init_model.weights],
            biases=[b.copy() for b in init_model.biases],
            config=config,
            n_classes=init_model.n_classes,
        )
    else:
        model = _init_model(config, X.shape[1], Y.shape[1], rng)

    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay ** (epoch // config.decay_every)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _sgd_step(model, X[batch], Y[batch], lr)
    return model


def _sgd_step(model, Xb, Yb, lr):
    activations = _forward(model, Xb)
    grad = (activations[-1] - Yb) / len(Xb)
    for layer in reversed(range(len(model.weights))):
        h_in = activations[layer]
        grad_w = h_in.T @ grad
        grad_b = grad.sum(axis=0)
        if layer > 0:
            grad = (grad @ model.weights[layer].T) * (activations[layer] > 0)
        model.weights[layer] -= lr * grad_w
        model.biases[layer] -= lr * grad_b


def cross_entropy(model, features, targets_one_hot):
    probs = predict_proba(model, features)
    clipped = np.clip(probs, 1e-12, 1.0)
    return float(-(np.asarray(targets_one_hot) * np.log(clipped)).sum(axis=1).mean())


def predict_proba(model, features):
    """Class probabilities for each row; every row sums to 1."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    return _forward(model, X)[-1]


def make_snapshot(model, pool_features, stage=0):
    """Freeze pool-wide probabilities and entropies for the current model."""
    probs = predict_proba(model, pool_features)
    return LearnerSnapshot(probs=probs, entropies=entropy_rows(probs), stage=stage)


class ExternalPredictions:
    """Stage-indexed classifier probabilities read from CSV files.

    The directory holds one ``stage_<labels>.csv`` per retrain label count,
    each with a ``prob_0..prob_{C-1}`` header and one row per dataset row
    (pool and test alike, in the original dataset order). This lets any
    externally trained model act as the principal learner.
    """

    _NAME = re.compile(r"^stage_(\d+)\.csv$")

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ValueError(f"external predictions directory not found: {directory}")
        self._paths = {}
        for path in self.directory.iterdir():
            match = self._NAME.match(path.name)
            if match:
                self._paths[int(match.group(1))] = path
        if not self._paths:
            raise ValueError(f"no stage_<labels>.csv files in {directory}")

    def stages(self):
        return sorted(self._paths)

    def probs_at(self, label_count):
        """The (N_rows, C) probability matrix for one retrain stage."""
        if label_count not in self._paths:
            raise ValueError(
                f"no external predictions for stage {label_count}; "
                f"available: {self.stages()}"
            )
        with open(self._paths[label_count], newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not all(name.startswith("prob_") for name in header):
                raise ValueError(
                    f"bad header in {self._paths[label_count]}: {header}"
                )
            rows = [[float(v) for v in row] for row in reader]
        return np.asarray(rows, dtype=float)
