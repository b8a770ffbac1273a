"""Datasets: Gaussian-XOR generation, CSV ingestion, stratified folds, and the
logarithmic sample-size schedule used by the benchmark harness."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidArgument,
    MissingFile,
    MissingLabelColumn,
    NonNumericFeature,
    SingleClassFile,
    StratificationInfeasible,
)

# Class 0 sits on the main diagonal, class 1 on the anti-diagonal.
XOR_CENTERS = np.array(
    [[[-1.0, -1.0], [1.0, 1.0]],
     [[1.0, -1.0], [-1.0, 1.0]]]
)

SCHEDULE_STEPS = 8


@dataclass(frozen=True)
class Dataset:
    """An n x d feature matrix with dense integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "unnamed"
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise InvalidArgument("features must be a nonempty 2-D matrix")
        if labels.shape != (feats.shape[0],):
            raise InvalidArgument("labels must be one per row")
        if not np.isfinite(feats).all():
            raise InvalidArgument("features contain non-finite values")
        if self.class_count < 1:
            raise InvalidArgument("class_count must be >= 1")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise InvalidArgument("labels must lie in [0, class_count)")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, indices, name: str | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.class_count,
            name if name is not None else self.name,
            self.feature_names,
        )

    def summary(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "d": self.d,
            "class_count": self.class_count,
            "class_histogram": self.class_histogram().tolist(),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary())


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignments, deterministic given (seed, labels)."""

    fold_count: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", a)
        self.assignments.setflags(write=False)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments != fold)[0]


@dataclass(frozen=True)
class SampleSchedule:
    """Eight log-spaced training-set sizes from 5*C up to the fold size."""

    sizes: tuple[int, ...]
    class_count: int
    fold_size: int
    collapsed: bool = False


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def gen_gaussian_xor(
    n_train: int, n_test: int, sigma: float = 0.5, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Sample train/test splits of the two-dimensional Gaussian XOR problem.

    Each sample draws its class fair-coin, then one of the class's two
    centers fair-coin, then adds isotropic Gaussian noise of scale ``sigma``.
    Bit-for-bit reproducible for a given ``seed``.
    """
    if n_train < 1 or n_test < 1:
        raise InvalidArgument("n_train and n_test must be >= 1")
    if not (sigma > 0):
        raise InvalidArgument("sigma must be positive")
    rng = np.random.default_rng(seed)

    def draw(n: int, name: str) -> Dataset:
        labels = rng.integers(0, 2, size=n)
        which = rng.integers(0, 2, size=n)
        noise = rng.standard_normal((n, 2)) * sigma
        feats = XOR_CENTERS[labels, which] + noise
        return Dataset(feats, labels, 2, name, ("x0", "x1"))

    return draw(n_train, "xor-train"), draw(n_test, "xor-test")


def xor_posterior(points, sigma: float = 0.5) -> np.ndarray:
    """P[class = 1 | x] under the four-Gaussian XOR mixture."""
    if not (sigma > 0):
        raise InvalidArgument("sigma must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    # Log-density per center, stabilized before exponentiation.
    flat = XOR_CENTERS.reshape(4, 2)
    sq = ((pts[:, None, :] - flat[None, :, :]) ** 2).sum(axis=2)
    logd = -sq / (2.0 * sigma * sigma)
    logd -= logd.max(axis=1, keepdims=True)
    dens = np.exp(logd)
    class0 = dens[:, 0] + dens[:, 1]
    class1 = dens[:, 2] + dens[:, 3]
    return class1 / (class0 + class1)


def xor_bayes_accuracy(sigma: float = 0.5, half_width: float = 4.0,
                       step: float = 0.005) -> float:
    """Bayes accuracy of the XOR mixture by midpoint quadrature.

    Integrates max_k(prior_k * density_k) over a square of the given
    half-width; mass outside is negligible for sigma well under half_width.
    """
    if not (sigma > 0):
        raise InvalidArgument("sigma must be positive")
    axis = np.arange(-half_width + step / 2.0, half_width, step)
    gx, gy = np.meshgrid(axis, axis)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    flat = XOR_CENTERS.reshape(4, 2)
    sq = ((pts[:, None, :] - flat[None, :, :]) ** 2).sum(axis=2)
    dens = np.exp(-sq / (2.0 * sigma * sigma)) / (2.0 * math.pi * sigma * sigma)
    # Each of the four centers carries prior mass 1/4.
    q0 = 0.25 * (dens[:, 0] + dens[:, 1])
    q1 = 0.25 * (dens[:, 2] + dens[:, 3])
    return float(np.maximum(q0, q1).sum() * step * step)


def save_csv(ds: Dataset, path: str | os.PathLike, label_column: str = "label") -> None:
    """Write a dataset as a headered CSV with one label column."""
    names = list(ds.feature_names) if ds.feature_names else [
        f"f{j}" for j in range(ds.d)
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + [label_column])
        for row, lab in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def load_csv(path: str | os.PathLike, label_column: str | int = "label") -> Dataset:
    """Load a headered CSV, re-indexing labels densely by first appearance.

    Raises MissingFile, MissingLabelColumn, NonNumericFeature (with the
    offending row and column), or SingleClassFile.
    """
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SingleClassFile(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        if isinstance(label_column, int):
            if not (-len(header) <= label_column < len(header)):
                raise MissingLabelColumn(f"label column index {label_column} out of range")
            label_idx = label_column % len(header)
        else:
            if label_column not in header:
                raise MissingLabelColumn(f"no column named {label_column!r} in {path}")
            label_idx = header.index(label_column)
        feat_cols = [j for j in range(len(header)) if j != label_idx]
        if not feat_cols:
            raise InvalidArgument("file has no feature columns")

        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for i, rec in enumerate(reader, start=1):
            if not rec or all(c.strip() == "" for c in rec):
                continue
            vals = []
            for j in feat_cols:
                cell = rec[j].strip() if j < len(rec) else ""
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericFeature(i, header[j], cell) from None
                if not math.isfinite(v):
                    raise NonNumericFeature(i, header[j], cell)
                vals.append(v)
            rows.append(vals)
            raw_labels.append(rec[label_idx].strip() if label_idx < len(rec) else "")

    if not rows:
        raise SingleClassFile(f"no data rows in {path}")
    index: dict[str, int] = {}
    labels = np.array([index.setdefault(lab, len(index)) for lab in raw_labels])
    if len(index) < 2:
        raise SingleClassFile(f"file holds a single class: {path}")
    name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return Dataset(
        np.array(rows, dtype=np.float64),
        labels,
        len(index),
        name,
        tuple(header[j] for j in feat_cols),
    )


def downsample(ds: Dataset, cap: int, seed: int = 0) -> Dataset:
    """Stratified subsample down to at most ``cap`` rows; identity if n <= cap."""
    if cap < ds.class_count:
        raise InvalidArgument("cap must be at least the class count")
    if ds.n <= cap:
        return ds
    hist = ds.class_histogram()
    # Proportional allocation, largest remainder, at least one per class.
    exact = hist * (cap / ds.n)
    take = np.floor(exact).astype(np.int64)
    take = np.minimum(np.maximum(take, 1), hist)
    while take.sum() > cap:
        take[np.argmax(take)] -= 1
    rema = exact - np.floor(exact)
    while take.sum() < cap:
        order = np.argsort(-rema, kind="stable")
        for c in order:
            if take.sum() >= cap:
                break
            if take[c] < hist[c]:
                take[c] += 1
                rema[c] = -1.0
    rng = np.random.default_rng(seed)
    picked = []
    for c in range(ds.class_count):
        members = np.nonzero(ds.labels == c)[0]
        picked.append(rng.choice(members, size=int(take[c]), replace=False))
    idx = np.sort(np.concatenate(picked))
    return ds.subset(idx)


def make_schedule(class_count: int, fold_size: int,
                  steps: int = SCHEDULE_STEPS) -> SampleSchedule:
    """Geometrically interpolated sizes from 5*C to the fold size.

    Rounding is half-up; duplicates collapse, so small datasets may yield
    fewer than ``steps`` entries. A fold no larger than 5*C degenerates to
    a single-size schedule with the ``collapsed`` flag set.
    """
    if class_count < 1 or fold_size < 1:
        raise InvalidArgument("class_count and fold_size must be >= 1")
    if steps < 2:
        raise InvalidArgument("steps must be >= 2")
    lo = 5 * class_count
    if fold_size <= lo:
        return SampleSchedule((fold_size,), class_count, fold_size, collapsed=True)
    a, b = math.log(lo), math.log(fold_size)
    raw = [
        _round_half_up(math.exp(a + i * (b - a) / (steps - 1)))
        for i in range(steps)
    ]
    sizes: list[int] = []
    for s in raw:
        s = max(1, s)
        if not sizes or s > sizes[-1]:
            sizes.append(s)
    return SampleSchedule(tuple(sizes), class_count, fold_size)


def stratified_folds(ds: Dataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Deal each class's shuffled members round-robin into k folds."""
    if k < 2:
        raise InvalidArgument("fold count must be >= 2")
    hist = ds.class_histogram()
    for c, count in enumerate(hist):
        if 0 < count < k:
            raise StratificationInfeasible(c, int(count), k)
    rng = np.random.default_rng(seed)
    assignments = np.empty(ds.n, dtype=np.int64)
    cursor = 0
    for c in range(ds.class_count):
        members = np.nonzero(ds.labels == c)[0]
        rng.shuffle(members)
        for i, idx in enumerate(members):
            assignments[idx] = (cursor + i) % k
        cursor += len(members)
    return FoldPlan(k, assignments, seed)


def derive_seed(master: int, *labels) -> int:
    """Named substream seed: stable across runs, platforms, and call order."""
    text = "\x1f".join(str(l) for l in labels)
    digest = hashlib.sha256(text.encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence(entropy=[int(master), *words])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stratified_order(labels: np.ndarray, class_count: int, seed: int = 0) -> np.ndarray:
    """A shuffle whose every prefix is near-proportionally stratified.

    Per-class queues are shuffled, then interleaved by largest deficit
    against the global class proportions, so prefix subsets of any length
    stay class-balanced. Used for the nested benchmark training subsets.
    """
    labels = np.asarray(labels)
    n = len(labels)
    rng = np.random.default_rng(seed)
    queues = []
    for c in range(class_count):
        members = np.nonzero(labels == c)[0]
        rng.shuffle(members)
        queues.append(list(members))
    props = np.bincount(labels, minlength=class_count) / n
    taken = np.zeros(class_count)
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        deficit = props * (i + 1) - taken
        deficit[[c for c in range(class_count) if not queues[c]]] = -np.inf
        c = int(np.argmax(deficit))
        order[i] = queues[c].pop()
        taken[c] += 1
    return order
