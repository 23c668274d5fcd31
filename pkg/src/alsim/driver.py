"""End-to-end selection loop: label bookkeeping, interval retraining,
per-label surrogate updates, utility scoring, and checkpoint evaluation.

One run is sequential by construction; independent runs (seeds, strategies)
share no mutable state and may execute concurrently.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    AccuracyEstimator,
    CalibrationState,
    combine_utilities,
    entropy_rows,
    influence_utility,
    record_prediction_outcome,
    select_next,
    surrogate_softmax_entropies,
    update_calibration,
)
from .kernel import KernelParams, estimate_sigma_x
from .learner import (
    ExternalPredictions,
    LearnerConfig,
    LearnerSnapshot,
    predict_proba,
    train,
)
from .seeding import rng_for, substream
from .sparse_gp import SparseSurrogate, build_basis

STRATEGIES = ("gp_surrogate", "u1_only", "u2_only", "random", "max_entropy")
GP_STRATEGIES = ("gp_surrogate", "u1_only", "u2_only")
COMBINATION_MODES = ("accuracy_weighted", "uniform")
INITIAL_POLICIES = ("uniform_random", "stratified")
KERNEL_VARIANTS = ("product", "input_only")


@dataclass(frozen=True)
class RunConfig:
    budget: int
    interval: int
    initial_labels: int
    seed: int = 0
    initial_policy: str = "uniform_random"
    basis_size: int = 128
    strategy: str = "gp_surrogate"
    combination: str = "accuracy_weighted"
    checkpoints: tuple = ()
    kernel: KernelParams = None  # None -> data-driven defaults
    sigma_x_multiplier: float = 1.0
    sigma_f_multiplier: float = 1.0
    noise_variance: float = 1e-10
    kernel_variant: str = "product"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    carry_labels: bool = False
    p_override: float = None  # force the combination weight, for diagnostics
    external_predictions: str = None


@dataclass
class SelectionRecord:
    step: int
    label_count: int  # labels held when the selection was made
    index: int
    influence: float
    calibrated_entropy: float
    accuracy_estimate: float
    utility: float
    score_time: float


@dataclass
class RunResult:
    selections: list
    checkpoint_accuracies: list  # (label_count, test accuracy)
    strategy: str
    seed: int

    @property
    def timings(self):
        return np.asarray([s.score_time for s in self.selections])

    @property
    def selected_indices(self):
        return [s.index for s in self.selections]


def validate_config(config, n_pool):
    if config.strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {config.strategy!r}")
    if config.combination not in COMBINATION_MODES:
        raise ValueError(f"unknown combination mode {config.combination!r}")
    if config.initial_policy not in INITIAL_POLICIES:
        raise ValueError(f"unknown initial policy {config.initial_policy!r}")
    if config.kernel_variant not in KERNEL_VARIANTS:
        raise ValueError(f"unknown kernel variant {config.kernel_variant!r}")
    if config.interval < 1:
        raise ValueError("interval must be >= 1")
    if not 1 <= config.initial_labels <= config.budget:
        raise ValueError("need 1 <= initial_labels <= budget")
    if config.budget > n_pool:
        raise ValueError(f"budget {config.budget} exceeds pool size {n_pool}")
    if config.strategy in GP_STRATEGIES and not 1 <= config.basis_size <= n_pool:
        raise ValueError("basis_size must be in [1, pool size]")
    if config.p_override is not None and not 0.0 <= config.p_override <= 1.0:
        raise ValueError("p_override must be in [0, 1]")
    for count in config.checkpoints:
        if not config.initial_labels <= count <= config.budget:
            raise ValueError(
                f"checkpoint {count} outside [initial_labels, budget]"
            )


def resolve_kernel_params(config, pool_x, n_classes):
    """Concrete KernelParams: explicit values win, otherwise the data-driven
    rules (half mean pairwise distance for sigma_x, the class count for
    sigma_f), each scaled by its multiplier."""
    if config.kernel is not None:
        return config.kernel
    sigma_x = estimate_sigma_x(pool_x, seed=substream(config.seed, "bandwidth"))
    return KernelParams(
        sigma_x=sigma_x * config.sigma_x_multiplier,
        sigma_f=float(n_classes) * config.sigma_f_multiplier,
        sigma_sq_noise=config.noise_variance,
    )


def _initial_labels(config, pool_y, n_pool):
    rng = rng_for(config.seed, "init")
    if config.initial_policy == "uniform_random":
        return np.sort(rng.choice(n_pool, size=config.initial_labels, replace=False))
    # stratified: spread the quota over classes, round-robin for remainders
    chosen = []
    classes = np.unique(pool_y)
    per_class = np.full(len(classes), config.initial_labels // len(classes))
    per_class[: config.initial_labels % len(classes)] += 1
    for cls, quota in zip(classes, per_class):
        members = np.flatnonzero(pool_y == cls)
        take = min(quota, len(members))
        chosen.extend(rng.choice(members, size=take, replace=False))
    short = config.initial_labels - len(chosen)
    if short > 0:
        rest = np.setdiff1d(np.arange(n_pool), chosen)
        chosen.extend(rng.choice(rest, size=short, replace=False))
    return np.sort(np.asarray(chosen, dtype=int))


class _BuiltinTrainer:
    """Retrains the built-in learner on the current labels, deterministically
    keyed by (run seed, label count)."""

    def __init__(self, config, dataset):
        self.config = config
        self.dataset = dataset
        self.previous = None

    def __call__(self, label_count, labeled_idx, y_onehot):
        seed = substream(self.config.seed, "learner", int(label_count))
        learner_config = replace(self.config.learner, seed=seed)
        init = self.previous if self.config.learner.warm_start else None
        model = train(
            self.dataset.pool_x[labeled_idx],
            y_onehot[labeled_idx],
            learner_config,
            init_model=init,
        )
        self.previous = model
        return _FittedPredictor(
            pool_probs=predict_proba(model, self.dataset.pool_x),
            test_probs=predict_proba(model, self.dataset.test_x),
        )


class _ExternalTrainer:
    """Looks up precomputed stage probabilities instead of training."""

    def __init__(self, config, dataset):
        if dataset.pool_rows is None or dataset.test_rows is None:
            raise ValueError(
                "external predictions need datasets with row provenance"
            )
        self.dataset = dataset
        self.source = ExternalPredictions(config.external_predictions)

    def __call__(self, label_count, labeled_idx, y_onehot):
        all_probs = self.source.probs_at(int(label_count))
        n_rows = len(self.dataset.pool_rows) + len(self.dataset.test_rows)
        if all_probs.shape[0] != n_rows:
            raise ValueError(
                f"external stage {label_count} has {all_probs.shape[0]} rows,"
                f" dataset has {n_rows}"
            )
        return _FittedPredictor(
            pool_probs=all_probs[self.dataset.pool_rows],
            test_probs=all_probs[self.dataset.test_rows],
        )


@dataclass
class _FittedPredictor:
    pool_probs: np.ndarray
    test_probs: np.ndarray

    def test_accuracy(self, test_y):
        if len(test_y) == 0:
            raise ValueError("empty test set")
        return float((self.test_probs.argmax(axis=1) == test_y).mean())


def evaluate(model, features, labels):
    """Fraction of argmax-correct predictions on a test split."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("empty test set")
    probs = predict_proba(model, features)
    return float((probs.argmax(axis=1) == labels).mean())


def run(config, dataset, oracle=None, observer=None):
    """Execute the selection loop and return the per-stage log.

    ``oracle`` maps a pool index to its class (defaults to the dataset's
    hidden labels). ``observer`` is an optional callable ``(event, payload)``
    invoked at "stage", "selected", and "inserted" with read-only views of
    the internals; it exists for diagnostics and verification.
    """
    n_pool = dataset.n_pool
    n_classes = dataset.n_classes
    validate_config(config, n_pool)
    if oracle is None:
        oracle = lambda i: int(dataset.pool_y[i])
    notify = observer if observer is not None else lambda event, payload: None

    eye = np.eye(n_classes)
    labeled = np.zeros(n_pool, dtype=bool)
    y_onehot = np.zeros((n_pool, n_classes))
    for i in _initial_labels(config, dataset.pool_y, n_pool):
        y_onehot[i] = eye[oracle(i)]
        labeled[i] = True
    label_count = int(labeled.sum())

    needs_gp = config.strategy in GP_STRATEGIES
    surrogate = None
    if needs_gp:
        params = resolve_kernel_params(config, dataset.pool_x, n_classes)
        basis = build_basis(
            dataset.pool_x,
            config.basis_size,
            n_classes,
            params,
            input_seed=substream(config.seed, "kmeans"),
            output_seed=substream(config.seed, "simplex"),
            include_output_kernel=config.kernel_variant == "product",
        )
        surrogate = SparseSurrogate(dataset.pool_x, basis, params)

    trainer = (
        _ExternalTrainer(config, dataset)
        if config.external_predictions
        else _BuiltinTrainer(config, dataset)
    )
    selection_rng = rng_for(config.seed, "selection")
    estimator = AccuracyEstimator()
    calibration = None
    checkpoints = set(config.checkpoints)
    selections = []
    accuracies = []

    def retrain():
        nonlocal predictor, snapshot, calibration
        predictor = trainer(label_count, np.flatnonzero(labeled), y_onehot)
        snapshot = make_snapshot_from(predictor.pool_probs, label_count)
        if needs_gp:
            carry = None
            if config.carry_labels:
                carry = {
                    int(i): y_onehot[i] for i in np.flatnonzero(labeled)
                }
            surrogate.rebuild(
                snapshot.probs, unlabeled=~labeled, labels=carry
            )
            calibration = CalibrationState.at_retrain(
                snapshot.entropies,
                _full_surrogate_entropies(surrogate, snapshot),
            )

    predictor = snapshot = None
    retrain()
    last_trained = label_count
    if label_count in checkpoints:
        accuracies.append((label_count, predictor.test_accuracy(dataset.test_y)))

    while label_count < config.budget:
        retrained_now = False
        if label_count % config.interval == 0 and last_trained != label_count:
            retrain()
            last_trained = label_count
            retrained_now = True

        unlabeled_idx = np.flatnonzero(~labeled)
        tic = time.perf_counter()
        influence = calibrated = combined = None
        p_estimate = float("nan")
        if config.strategy == "random":
            selected = int(selection_rng.choice(unlabeled_idx))
        elif config.strategy == "max_entropy":
            combined = snapshot.entropies[unlabeled_idx]
            selected = select_next(combined, unlabeled_idx)
        else:
            if config.strategy in ("gp_surrogate", "u1_only"):
                influence = influence_utility(surrogate, unlabeled_idx)
            if config.strategy in ("gp_surrogate", "u2_only"):
                if retrained_now or label_count == last_trained:
                    calibrated_full = calibration.calibrated.copy()
                else:
                    calibrated_full = update_calibration(
                        calibration, surrogate, snapshot
                    )
                calibrated = calibrated_full[unlabeled_idx]
            if config.strategy == "gp_surrogate":
                p_estimate = (
                    config.p_override
                    if config.p_override is not None
                    else estimator.value
                )
                combined = combine_utilities(
                    influence, calibrated, p_estimate, config.combination
                )
            elif config.strategy == "u1_only":
                combined = influence
            else:
                combined = calibrated
            selected = select_next(combined, unlabeled_idx)
        score_time = time.perf_counter() - tic

        notify(
            "stage",
            {
                "label_count": label_count,
                "retrained": retrained_now or label_count == last_trained,
                "candidates": unlabeled_idx,
                "influence": influence,
                "calibrated": calibrated,
                "accuracy_estimate": p_estimate,
                "utility": combined,
                "selected": selected,
                "snapshot": snapshot,
                "surrogate": surrogate,
            },
        )

        true_class = int(oracle(selected))
        if needs_gp:
            # the accuracy check treats the about-to-be-labeled point as a
            # test point: predict before the label reaches the surrogate
            mean, _ = surrogate.predict(selected)
            predicted = int(np.argmax(snapshot.probs[selected] + mean))
            record_prediction_outcome(estimator, predicted, true_class)
            notify(
                "selected",
                {"index": selected, "label_count": label_count,
                 "surrogate": surrogate},
            )
            surrogate.insert_label(
                selected, eye[true_class], snapshot.probs[selected]
            )
            notify(
                "inserted",
                {"index": selected, "label_count": label_count + 1,
                 "surrogate": surrogate},
            )
        y_onehot[selected] = eye[true_class]
        labeled[selected] = True

        selections.append(
            SelectionRecord(
                step=len(selections),
                label_count=label_count,
                index=selected,
                influence=_at(influence, unlabeled_idx, selected),
                calibrated_entropy=_at(calibrated, unlabeled_idx, selected),
                accuracy_estimate=p_estimate,
                utility=_at(combined, unlabeled_idx, selected),
                score_time=score_time,
            )
        )
        label_count += 1

        if label_count in checkpoints:
            if last_trained != label_count:
                if label_count % config.interval == 0:
                    # fold the upcoming interval retrain forward so the
                    # checkpoint reflects a model trained on these labels
                    retrain()
                    last_trained = label_count
                    eval_predictor = predictor
                else:
                    eval_predictor = trainer(
                        label_count, np.flatnonzero(labeled), y_onehot
                    )
            else:
                eval_predictor = predictor
            accuracies.append(
                (label_count, eval_predictor.test_accuracy(dataset.test_y))
            )

    return RunResult(
        selections=selections,
        checkpoint_accuracies=accuracies,
        strategy=config.strategy,
        seed=config.seed,
    )


def make_snapshot_from(pool_probs, stage):
    probs = np.asarray(pool_probs, dtype=float)
    return LearnerSnapshot(probs=probs, entropies=entropy_rows(probs), stage=stage)


def _full_surrogate_entropies(surrogate, snapshot):
    values = np.zeros(surrogate.n_points)
    idx = surrogate.unlabeled_indices()
    values[idx] = surrogate_softmax_entropies(surrogate, snapshot.probs, idx)
    return values


def _at(vector, candidates, index):
    if vector is None:
        return float("nan")
    pos = np.searchsorted(candidates, index)
    return float(vector[pos])


def run_baseline_random(config, dataset, oracle=None):
    return run(replace(config, strategy="random"), dataset, oracle)


def run_baseline_max_entropy(config, dataset, oracle=None):
    return run(replace(config, strategy="max_entropy"), dataset, oracle)
