"""Dataset container, CSV input/output, and synthetic generators."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import rng_for


class DatasetError(Exception):
    """A dataset file is missing, malformed, or inconsistent."""


@dataclass
class Dataset:
    """Pool features/labels plus a disjoint test split.

    ``pool_rows``/``test_rows`` keep the original dataset-file row indices
    so external prediction files can be aligned; they are None for purely
    in-memory datasets.
    """

    pool_x: np.ndarray
    pool_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    n_classes: int
    pool_rows: np.ndarray = None
    test_rows: np.ndarray = None

    @property
    def n_pool(self):
        return len(self.pool_x)


def load_dataset_csv(path, split_path=None):
    """Read ``feature_0..feature_{d-1},label`` rows plus a companion split
    file listing the test-row indices."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"empty dataset file: {path}") from None
        d = len(header) - 1
        expected = [f"feature_{i}" for i in range(d)] + ["label"]
        if header != expected:
            raise DatasetError(f"bad dataset header in {path}: {header}")
        features, labels = [], []
        for line, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise DatasetError(f"{path}:{line}: expected {d + 1} columns")
            try:
                features.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise DatasetError(f"{path}:{line}: {exc}") from None
    if not features:
        raise DatasetError(f"dataset has no rows: {path}")
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if y.min() < 0:
        raise DatasetError("labels must be nonnegative class indices")
    n_classes = int(y.max()) + 1

    n = len(X)
    if split_path is None:
        raise DatasetError(
            "a test split file is required (no split_path given)"
        )
    test_rows = _load_split(split_path, n)
    mask = np.zeros(n, dtype=bool)
    mask[test_rows] = True
    pool_rows = np.flatnonzero(~mask)
    return Dataset(
        pool_x=X[pool_rows],
        pool_y=y[pool_rows],
        test_x=X[test_rows],
        test_y=y[test_rows],
        n_classes=n_classes,
        pool_rows=pool_rows,
        test_rows=test_rows,
    )


def _load_split(path, n_rows):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"split file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["test_index"]:
            raise DatasetError(f"bad split header in {path}: {header}")
        try:
            idx = np.asarray([int(row[0]) for row in reader], dtype=int)
        except (ValueError, IndexError) as exc:
            raise DatasetError(f"bad split file {path}: {exc}") from None
    if len(idx) == 0:
        raise DatasetError(f"split file lists no test rows: {path}")
    if idx.min() < 0 or idx.max() >= n_rows or len(np.unique(idx)) != len(idx):
        raise DatasetError(f"split indices out of range or duplicated: {path}")
    return np.sort(idx)


def write_dataset_csv(path, features, labels):
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"feature_{i}" for i in range(features.shape[1])] + ["label"])
        for row, label in zip(features, labels):
            writer.writerow([f"{v:.17g}" for v in row] + [int(label)])
    tmp.replace(path)


def write_split_csv(path, test_rows):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_index"])
        for idx in np.asarray(test_rows, dtype=int):
            writer.writerow([int(idx)])
    tmp.replace(path)


def make_blobs(n, n_classes, dim, spread=1.0, center_scale=1.0, seed=0):
    """Gaussian class clusters with multinomial class assignment.

    Class centers are standard-normal draws scaled by ``center_scale``;
    each point picks a class uniformly and adds isotropic noise of standard
    deviation ``spread``.
    """
    if n_classes < 2 or n < n_classes:
        raise DatasetError("blobs need >= 2 classes and n >= n_classes")
    rng = rng_for(seed, "blobs")
    centers = rng.normal(0.0, center_scale, (n_classes, dim))
    labels = rng.integers(0, n_classes, size=n)
    features = centers[labels] + rng.normal(0.0, spread, (n, dim))
    return features, labels


def make_two_moons(n, noise=0.1, seed=0):
    """Two interleaving half circles in the plane, labels 0 and 1."""
    rng = rng_for(seed, "moons")
    n_top = n // 2
    n_bot = n - n_top
    t_top = rng.uniform(0.0, np.pi, n_top)
    t_bot = rng.uniform(0.0, np.pi, n_bot)
    top = np.column_stack([np.cos(t_top), np.sin(t_top)])
    bottom = np.column_stack([1.0 - np.cos(t_bot), 0.5 - np.sin(t_bot)])
    features = np.vstack([top, bottom]) + rng.normal(0.0, noise, (n, 2))
    labels = np.concatenate([np.zeros(n_top, int), np.ones(n_bot, int)])
    order = rng.permutation(n)
    return features[order], labels[order]


def generate_synthetic(spec, seed):
    """Features and labels from a synthetic-generator spec dict."""
    kind = spec.get("kind")
    if kind == "blobs":
        return make_blobs(
            n=int(spec["n"]),
            n_classes=int(spec.get("classes", 2)),
            dim=int(spec.get("dim", 2)),
            spread=float(spec.get("spread", 1.0)),
            center_scale=float(spec.get("center_scale", 1.0)),
            seed=seed,
        )
    if kind == "two_moons":
        return make_two_moons(
            n=int(spec["n"]), noise=float(spec.get("noise", 0.1)), seed=seed
        )
    raise DatasetError(f"unknown synthetic dataset kind {kind!r}")


def split_dataset(features, labels, test_fraction, seed):
    """In-memory Dataset with a seeded uniform test split."""
    n = len(features)
    n_test = max(1, int(round(n * test_fraction)))
    if n_test >= n:
        raise DatasetError("test fraction leaves no pool rows")
    rng = rng_for(seed, "split")
    test_rows = np.sort(rng.choice(n, size=n_test, replace=False))
    mask = np.zeros(n, dtype=bool)
    mask[test_rows] = True
    pool_rows = np.flatnonzero(~mask)
    labels = np.asarray(labels, dtype=int)
    features = np.asarray(features, dtype=float)
    return Dataset(
        pool_x=features[pool_rows],
        pool_y=labels[pool_rows],
        test_x=features[test_rows],
        test_y=labels[test_rows],
        n_classes=int(labels.max()) + 1,
        pool_rows=pool_rows,
        test_rows=test_rows,
    )
