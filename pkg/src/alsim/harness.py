"""Experiment orchestration: spec parsing, repeated runs, sweeps, and
CSV/JSON/figure emission.

A spec is a JSON file naming a dataset (file or synthetic generator), the
run configuration, the strategies to compare, and a repeat count. All
randomness flows from the spec's single seed through named substreams, so a
spec rerun reproduces its outputs byte for byte.
"""

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .datasets import (
    Dataset,
    DatasetError,
    generate_synthetic,
    load_dataset_csv,
    split_dataset,
    write_dataset_csv,
    write_split_csv,
)
from .driver import (
    COMBINATION_MODES,
    STRATEGIES,
    RunConfig,
    run,
    validate_config,
)
from .kernel import KernelParams
from .learner import LearnerConfig
from .seeding import substream

SWEEP_AXES = {
    "K": int,
    "sigma_x_multiplier": float,
    "sigma_f_multiplier": float,
    "noise_variance": float,
    "combination": str,
}


class SpecError(Exception):
    """The experiment spec is malformed or inconsistent."""


def load_spec(path):
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"spec file not found: {path}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SpecError("spec must be a JSON object")
    return raw


def _require(raw, key, kind, where="spec"):
    if key not in raw:
        raise SpecError(f"{where} is missing required key {key!r}")
    value = raw[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise SpecError(f"{where}.{key} must be {kind.__name__}, got {value!r}")
    return value


@dataclasses.dataclass
class ExperimentSpec:
    seed: int
    repeats: int
    output_dir: str
    dataset: dict
    strategies: tuple
    run_template: dict
    plots: bool = True


def parse_spec(raw):
    """Validate the raw JSON dict into an ExperimentSpec; everything is
    checked before any run starts."""
    seed = _require(raw, "seed", int)
    repeats = _require(raw, "repeats", int)
    if repeats < 1:
        raise SpecError("repeats must be >= 1")
    output_dir = _require(raw, "output_dir", str)
    dataset = _require(raw, "dataset", dict)
    if ("path" in dataset) == ("synthetic" in dataset):
        raise SpecError("dataset needs exactly one of 'path' or 'synthetic'")
    run_raw = _require(raw, "run", dict)
    strategies = run_raw.get("strategies", ["gp_surrogate"])
    if not isinstance(strategies, list) or not strategies:
        raise SpecError("run.strategies must be a non-empty list")
    for strategy in strategies:
        if strategy not in STRATEGIES:
            raise SpecError(f"unknown strategy {strategy!r}")
    plots = raw.get("plots", True)
    if not isinstance(plots, bool):
        raise SpecError("plots must be a boolean")
    spec = ExperimentSpec(
        seed=seed,
        repeats=repeats,
        output_dir=output_dir,
        dataset=dataset,
        strategies=tuple(strategies),
        run_template=run_raw,
        plots=plots,
    )
    # fail fast on structural config problems (pool-size checks happen
    # against the loaded dataset later, still before any run starts)
    build_run_config(spec, strategies[0], seed)
    return spec


def build_run_config(spec, strategy, run_seed):
    raw = spec.run_template
    budget = _require(raw, "budget", int, "run")
    interval = _require(raw, "interval", int, "run")
    initial = _require(raw, "initial_labels", int, "run")
    kernel_raw = raw.get("kernel", {})
    if not isinstance(kernel_raw, dict):
        raise SpecError("run.kernel must be an object")
    learner_raw = raw.get("learner", {})
    if not isinstance(learner_raw, dict):
        raise SpecError("run.learner must be an object")

    explicit = None
    if kernel_raw.get("sigma_x") is not None:
        if kernel_raw.get("sigma_f") is None:
            raise SpecError("explicit kernel needs both sigma_x and sigma_f")
        try:
            explicit = KernelParams(
                sigma_x=float(kernel_raw["sigma_x"]),
                sigma_f=float(kernel_raw["sigma_f"]),
                sigma_sq_noise=float(kernel_raw.get("noise_variance", 1e-10)),
            )
        except ValueError as exc:
            raise SpecError(str(exc)) from None

    try:
        learner = LearnerConfig(
            architecture=learner_raw.get("architecture", "softmax_linear"),
            hidden=tuple(learner_raw.get("hidden", ())),
            learning_rate=float(learner_raw.get("learning_rate", 0.01)),
            lr_decay=float(learner_raw.get("lr_decay", 0.1)),
            decay_every=int(learner_raw.get("decay_every", 10)),
            batch_size=int(learner_raw.get("batch_size", 30)),
            epochs=int(learner_raw.get("epochs", 100)),
            warm_start=bool(learner_raw.get("warm_start", False)),
        )
    except ValueError as exc:
        raise SpecError(str(exc)) from None

    checkpoints = raw.get("checkpoints", "auto")
    if checkpoints == "auto":
        checkpoints = _auto_checkpoints(initial, budget, interval)
    elif isinstance(checkpoints, list) and all(
        isinstance(c, int) for c in checkpoints
    ):
        checkpoints = tuple(sorted(set(checkpoints)))
    else:
        raise SpecError("run.checkpoints must be 'auto' or a list of ints")

    try:
        return RunConfig(
            budget=budget,
            interval=interval,
            initial_labels=initial,
            seed=run_seed,
            initial_policy=raw.get("initial_policy", "uniform_random"),
            basis_size=int(raw.get("basis_size", 128)),
            strategy=strategy,
            combination=raw.get("combination", "accuracy_weighted"),
            checkpoints=checkpoints,
            kernel=explicit,
            sigma_x_multiplier=float(kernel_raw.get("sigma_x_multiplier", 1.0)),
            sigma_f_multiplier=float(kernel_raw.get("sigma_f_multiplier", 1.0)),
            noise_variance=float(kernel_raw.get("noise_variance", 1e-10)),
            kernel_variant=kernel_raw.get("variant", "product"),
            learner=learner,
            carry_labels=bool(raw.get("carry_labels", False)),
            external_predictions=raw.get("external_predictions"),
        )
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from None


def _auto_checkpoints(initial, budget, interval):
    counts = {initial, budget}
    counts.update(
        t for t in range(initial, budget + 1) if t % interval == 0
    )
    return tuple(sorted(counts))


def build_dataset(spec):
    raw = spec.dataset
    if "path" in raw:
        split = raw.get("split")
        if split is None:
            raise SpecError("dataset.path needs a companion 'split' file")
        return load_dataset_csv(raw["path"], split)
    synth = raw["synthetic"]
    if not isinstance(synth, dict):
        raise SpecError("dataset.synthetic must be an object")
    features, labels = generate_synthetic(synth, substream(spec.seed, "dataset"))
    return split_dataset(
        features,
        labels,
        test_fraction=float(synth.get("test_fraction", 0.25)),
        seed=substream(spec.seed, "dataset"),
    )


def _max_workers():
    try:
        return max(1, int(os.environ.get("ALSIM_THREADS", "1")))
    except ValueError:
        return 1


def _run_job(args):
    raw_spec, strategy, repeat = args
    spec = parse_spec(raw_spec)
    dataset = build_dataset(spec)
    config = build_run_config(spec, strategy, substream(spec.seed, "rep", repeat))
    validate_config(config, dataset.n_pool)
    return run(config, dataset)


def run_experiment(raw_spec, spec=None):
    """Execute every (strategy, repeat) run and write the result files.

    Returns the output directory. Files: one selections CSV per run, an
    aggregated ``curves.csv``, ``summary.json``, and (unless disabled) a
    ``curves.png`` learning-curve figure.
    """
    if spec is None:
        spec = parse_spec(raw_spec)
    dataset = build_dataset(spec)
    jobs = [
        (raw_spec, strategy, repeat)
        for strategy in spec.strategies
        for repeat in range(spec.repeats)
    ]
    for raw, strategy, repeat in jobs:
        config = build_run_config(spec, strategy, substream(spec.seed, "rep", repeat))
        validate_config(config, dataset.n_pool)

    workers = _max_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_strategy = {}
    for (_, strategy, repeat), result in zip(jobs, results):
        by_strategy.setdefault(strategy, []).append(result)
        _write_selections(out / f"selections_{strategy}_r{repeat}.csv", result)

    curve_rows = _curve_rows(by_strategy)
    _write_curves(out / "curves.csv", curve_rows)
    _write_summary(out / "summary.json", raw_spec, spec, by_strategy)
    if spec.plots:
        from .report import plot_learning_curves

        plot_learning_curves(curve_rows, out / "curves.png")
    return out


def _curve_rows(by_strategy):
    rows = []
    for strategy in sorted(by_strategy):
        results = by_strategy[strategy]
        counts = [c for c, _ in results[0].checkpoint_accuracies]
        acc = np.asarray(
            [[a for _, a in r.checkpoint_accuracies] for r in results]
        )
        for j, count in enumerate(counts):
            rows.append(
                {
                    "label_count": count,
                    "mean_acc": float(acc[:, j].mean()),
                    "std_acc": float(acc[:, j].std()),
                    "strategy": strategy,
                }
            )
    return rows


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _write_rows(path, fieldnames, rows):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[name]) for name in fieldnames) + "\n")
    tmp.replace(path)


def _write_curves(path, rows):
    _write_rows(path, ["label_count", "mean_acc", "std_acc", "strategy"], rows)


def _write_selections(path, result):
    rows = [
        {
            "step": s.step,
            "label_count": s.label_count,
            "index": s.index,
            "influence_utility": s.influence,
            "calibrated_entropy": s.calibrated_entropy,
            "accuracy_estimate": s.accuracy_estimate,
            "combined_utility": s.utility,
            "score_time_s": s.score_time,
        }
        for s in result.selections
    ]
    _write_rows(
        path,
        [
            "step",
            "label_count",
            "index",
            "influence_utility",
            "calibrated_entropy",
            "accuracy_estimate",
            "combined_utility",
            "score_time_s",
        ],
        rows,
    )


def _write_summary(path, raw_spec, spec, by_strategy):
    summary = {
        "spec": raw_spec,
        "seeds": {
            strategy: [r.seed for r in results]
            for strategy, results in by_strategy.items()
        },
        "mean_score_time_s": {
            strategy: float(
                np.concatenate([r.timings for r in results]).mean()
            )
            if any(len(r.timings) for r in results)
            else 0.0
            for strategy, results in by_strategy.items()
        },
        "final_accuracy": {
            strategy: float(
                np.mean([r.checkpoint_accuracies[-1][1] for r in results])
            )
            for strategy, results in by_strategy.items()
            if results[0].checkpoint_accuracies
        },
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    tmp.replace(path)


def apply_axis(raw_spec, axis, value):
    """A deep-copied spec with one sweep axis changed."""
    raw = json.loads(json.dumps(raw_spec))
    run_raw = raw.setdefault("run", {})
    if axis == "K":
        run_raw["basis_size"] = value
    elif axis == "combination":
        if value not in COMBINATION_MODES:
            raise SpecError(f"unknown combination mode {value!r}")
        run_raw["combination"] = value
    else:
        kernel = run_raw.setdefault("kernel", {})
        kernel[axis] = value
    return raw


def run_sweep(raw_spec, axis, values):
    """Run the base spec once per axis value and emit accuracy offsets.

    Only the first strategy in the spec is swept. Writes
    ``sweep_<axis>.csv`` (axis value, label count, mean accuracy, offset
    versus the unmodified base configuration) plus a figure.
    """
    if axis not in SWEEP_AXES:
        raise SpecError(
            f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}"
        )
    if not values:
        raise SpecError("sweep needs at least one value")
    spec = parse_spec(raw_spec)
    primary = spec.strategies[0]

    base_raw = json.loads(json.dumps(raw_spec))
    base_raw["run"]["strategies"] = [primary]
    base_raw["plots"] = False
    base_spec = parse_spec(base_raw)
    base_curves = _strategy_curve(base_raw, base_spec, primary)

    rows = []
    for value in values:
        swept_raw = apply_axis(base_raw, axis, value)
        swept_spec = parse_spec(swept_raw)
        curves = _strategy_curve(swept_raw, swept_spec, primary)
        for count, mean_acc in curves:
            base_acc = dict(base_curves).get(count)
            offset = float("nan") if base_acc is None else mean_acc - base_acc
            rows.append(
                {
                    "axis_value": value,
                    "label_count": count,
                    "mean_acc": mean_acc,
                    "offset_vs_base": offset,
                }
            )

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{axis}.csv"
    _write_rows(
        path, ["axis_value", "label_count", "mean_acc", "offset_vs_base"], rows
    )
    if spec.plots:
        from .report import plot_sweep

        plot_sweep(rows, axis, out / f"sweep_{axis}.png")
    return path


def _strategy_curve(raw_spec, spec, strategy):
    dataset = build_dataset(spec)
    accs = []
    for repeat in range(spec.repeats):
        config = build_run_config(spec, strategy, substream(spec.seed, "rep", repeat))
        validate_config(config, dataset.n_pool)
        result = run(config, dataset)
        accs.append(result.checkpoint_accuracies)
    counts = [c for c, _ in accs[0]]
    matrix = np.asarray([[a for _, a in one] for one in accs])
    return [(count, float(matrix[:, j].mean())) for j, count in enumerate(counts)]


def generate_dataset(raw_spec, out_dir):
    """Write a synthetic dataset (CSV plus split file) described by a spec.

    Accepts either a bare generator object ``{"kind": ..., "seed": ...}`` or
    a full experiment spec with ``dataset.synthetic``.
    """
    if "dataset" in raw_spec:
        seed = _require(raw_spec, "seed", int)
        synth = raw_spec["dataset"].get("synthetic")
        if synth is None:
            raise SpecError("gen needs a synthetic dataset spec")
    else:
        synth = raw_spec
        seed = int(synth.get("seed", 0))
    features, labels = generate_synthetic(synth, substream(seed, "dataset"))
    dataset = split_dataset(
        features,
        labels,
        test_fraction=float(synth.get("test_fraction", 0.25)),
        seed=substream(seed, "dataset"),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out / "dataset.csv", features, labels)
    write_split_csv(out / "split.csv", dataset.test_rows)
    return out / "dataset.csv", out / "split.csv"
