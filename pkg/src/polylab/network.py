"""Fully connected ReLU classifier trained from scratch: softmax head,
cross-entropy + L2 objective, mini-batch SGD with momentum, early stopping,
and randomized hyperparameter search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, stratified_order
from .errors import InvalidArgument, TrainingDiverged
from .metrics import ConfusionMatrix, cohen_kappa


@dataclass(frozen=True)
class NetworkModel:
    """Chained affine layers; ReLU on every hidden layer, logits at the top."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    dimension: int
    class_count: int

    def __post_init__(self):
        widths = [self.dimension]
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != widths[-1] or W.shape[1] != b.shape[0]:
                raise InvalidArgument("layer shapes do not chain")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise InvalidArgument("parameters must be finite")
            widths.append(W.shape[1])
        if widths[-1] != self.class_count:
            raise InvalidArgument("last layer width must equal class_count")

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(W.shape[1] for W in self.weights[:-1])

    @property
    def hidden_layer_count(self) -> int:
        return len(self.weights) - 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    l2: float = 1e-4
    max_epochs: int = 200
    patience: int = 3
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidArgument("learning_rate, batch_size, max_epochs must be positive")
        if not (0 <= self.momentum < 1):
            raise InvalidArgument("momentum must be in [0, 1)")
        if self.l2 < 0:
            raise InvalidArgument("l2 must be non-negative")
        if not (0 < self.validation_fraction < 1):
            raise InvalidArgument("validation_fraction must be in (0, 1)")
        if not (1 <= self.patience <= self.max_epochs):
            raise InvalidArgument("patience must be in [1, max_epochs]")


@dataclass(frozen=True)
class SearchSpace:
    """Randomized-search ranges for architecture and L2 strength."""

    width_min: int = 20
    width_max: int = 400
    depth_min: int = 1
    depth_max: int = 3
    l2_min: float = 1e-5
    l2_max: float = 1e-2
    draws: int = 20

    def __post_init__(self):
        if not (1 <= self.width_min <= self.width_max):
            raise InvalidArgument("width range empty")
        if not (1 <= self.depth_min <= self.depth_max):
            raise InvalidArgument("depth range empty")
        if not (0 < self.l2_min <= self.l2_max):
            raise InvalidArgument("l2 range empty")
        if self.draws < 1:
            raise InvalidArgument("draws must be >= 1")

    def sample(self, rng: np.random.Generator) -> tuple[tuple[int, ...], float]:
        """One configuration: depth, independent per-layer widths, log-uniform l2."""
        depth = int(rng.integers(self.depth_min, self.depth_max + 1))
        widths = tuple(
            int(w) for w in rng.integers(self.width_min, self.width_max + 1, size=depth)
        )
        l2 = float(np.exp(rng.uniform(math.log(self.l2_min), math.log(self.l2_max))))
        return widths, l2


@dataclass
class TrainHistory:
    """Per-epoch record of one training run."""

    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0       # 1-based; 0 means no validation was used
    stopped_epoch: int = 0    # 1-based epoch at which training ended


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record an epoch's validation loss; True means stop now."""
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def init_params(dimension: int, hidden: tuple[int, ...], class_count: int,
                rng: np.random.Generator):
    """Fan-in-scaled uniform weights (bound sqrt(6/fan_in)), zero biases."""
    widths = [dimension, *hidden, class_count]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(m: NetworkModel, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Logits plus the post-ReLU activation vector of every hidden layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.dimension,):
        raise InvalidArgument(f"expected a length-{m.dimension} vector")
    if not np.isfinite(x).all():
        raise InvalidArgument("input contains non-finite values")
    logits, acts = forward_batch(m, x[None, :])
    return logits[0], [a[0] for a in acts]


def forward_batch(m: NetworkModel, X) -> tuple[np.ndarray, list[np.ndarray]]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.dimension:
        raise InvalidArgument(f"expected n x {m.dimension} input")
    h = X
    activations = []
    for W, b in zip(m.weights[:-1], m.biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        activations.append(h)
    logits = h @ m.weights[-1] + m.biases[-1]
    return logits, activations


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(m: NetworkModel, x) -> np.ndarray:
    logits, _ = forward(m, x)
    return softmax(logits)


def predict_proba_batch(m: NetworkModel, X) -> np.ndarray:
    logits, _ = forward_batch(m, X)
    return softmax(logits)


def predict_batch(m: NetworkModel, X) -> np.ndarray:
    return np.argmax(predict_proba_batch(m, X), axis=1)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(log_norm - z[np.arange(len(labels)), labels]))


def loss_and_gradients(weights, biases, X, y, l2: float):
    """Mean cross-entropy plus (l2/2)*sum ||W||^2, with exact gradients.

    The L2 penalty covers weights only, not biases. Returns
    (loss, weight_grads, bias_grads).
    """
    n = len(X)
    h = X
    hiddens = [X]
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        hiddens.append(h)
    logits = h @ weights[-1] + biases[-1]

    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    ce = float(np.mean(np.log(e.sum(axis=1)) - z[np.arange(n), y]))
    penalty = 0.5 * l2 * sum(float((W * W).sum()) for W in weights)

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    w_grads = [None] * len(weights)
    b_grads = [None] * len(weights)
    for layer in range(len(weights) - 1, -1, -1):
        w_grads[layer] = hiddens[layer].T @ delta + l2 * weights[layer]
        b_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (hiddens[layer] > 0)
    return ce + penalty, w_grads, b_grads


def _validation_split(ds: Dataset, fraction: float, rng: np.random.Generator):
    """Stratified split into (train indices, val indices); val may be empty
    for very small datasets."""
    n_val = int(round(fraction * ds.n))
    if n_val < 1 or ds.n - n_val < 1:
        return np.arange(ds.n), np.array([], dtype=np.int64)
    order = stratified_order(ds.labels, ds.class_count,
                             seed=int(rng.integers(0, 2**63 - 1)))
    return order[n_val:], order[:n_val]


def train(ds: Dataset, arch: tuple[int, ...] | list[int],
          cfg: TrainConfig = TrainConfig()) -> tuple[NetworkModel, TrainHistory]:
    """Mini-batch SGD with momentum and early stopping.

    A stratified validation split (cfg.validation_fraction) drives early
    stopping on plain cross-entropy; the parameters from the best
    validation epoch are restored. Deterministic given cfg.seed.
    """
    arch = tuple(int(w) for w in arch)
    if any(w < 1 for w in arch):
        raise InvalidArgument("hidden widths must be >= 1")
    if ds.class_count < 2:
        raise InvalidArgument("training requires at least 2 classes")
    ss = np.random.SeedSequence(cfg.seed)
    split_rng, init_rng, shuffle_rng = (np.random.default_rng(c) for c in ss.spawn(3))

    train_idx, val_idx = _validation_split(ds, cfg.validation_fraction, split_rng)
    X_tr, y_tr = ds.features[train_idx], ds.labels[train_idx]
    X_val, y_val = ds.features[val_idx], ds.labels[val_idx]
    use_val = len(val_idx) > 0

    weights, biases = init_params(ds.d, arch, ds.class_count, init_rng)
    vel_w = [np.zeros_like(W) for W in weights]
    vel_b = [np.zeros_like(b) for b in biases]
    history = TrainHistory()
    stopper = EarlyStopper(cfg.patience)
    best_params = None

    n = len(X_tr)
    for epoch in range(1, cfg.max_epochs + 1):
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            loss, w_grads, b_grads = loss_and_gradients(
                weights, biases, X_tr[batch], y_tr[batch], cfg.l2
            )
            epoch_loss += loss * len(batch)
            for i in range(len(weights)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * w_grads[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * b_grads[i]
                weights[i] = weights[i] + vel_w[i]
                biases[i] = biases[i] + vel_b[i]
        epoch_loss /= n
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(epoch)
        history.train_losses.append(epoch_loss)
        history.stopped_epoch = epoch
        if use_val:
            logits = _raw_forward(weights, biases, X_val)
            val_loss = cross_entropy(logits, y_val)
            if not math.isfinite(val_loss):
                raise TrainingDiverged(epoch)
            history.val_losses.append(val_loss)
            improved = val_loss < stopper.best
            stop = stopper.update(epoch, val_loss)
            if improved:
                best_params = ([W.copy() for W in weights], [b.copy() for b in biases])
            if stop:
                break

    if use_val and best_params is not None:
        weights, biases = best_params
        history.best_epoch = stopper.best_epoch
    model = NetworkModel(tuple(weights), tuple(biases), ds.d, ds.class_count)
    return model, history


def _raw_forward(weights, biases, X):
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
    return h @ weights[-1] + biases[-1]


@dataclass(frozen=True)
class SearchResult:
    arch: tuple[int, ...]
    l2: float
    log: tuple[dict, ...]


def random_search(ds: Dataset, space: SearchSpace = SearchSpace(),
                  folds: int = 5, seed: int = 0,
                  base_cfg: TrainConfig = TrainConfig(),
                  plan=None) -> SearchResult:
    """Draw configurations at random and keep the best mean fold kappa.

    Each draw is scored by k-fold cross-validation on ``ds`` (pass
    ``plan`` to reuse an existing fold assignment); a diverged fold
    scores -inf for the whole draw instead of aborting the search.
    Ties keep the earliest draw.
    """
    from .data import stratified_folds  # local import avoids cycle at module load

    if plan is None:
        plan = stratified_folds(ds, folds, seed=seed)
    folds = plan.fold_count
    ss = np.random.SeedSequence(seed)
    draw_rng = np.random.default_rng(ss.spawn(1)[0])
    fold_seeds = ss.generate_state(space.draws * folds, dtype=np.uint64)

    log = []
    best_idx, best_score = 0, -math.inf
    for i in range(space.draws):
        arch, l2 = space.sample(draw_rng)
        kappas = []
        for f in range(plan.fold_count):
            cfg = TrainConfig(
                learning_rate=base_cfg.learning_rate,
                momentum=base_cfg.momentum,
                batch_size=base_cfg.batch_size,
                l2=l2,
                max_epochs=base_cfg.max_epochs,
                patience=base_cfg.patience,
                validation_fraction=base_cfg.validation_fraction,
                seed=int(fold_seeds[i * folds + f]),
            )
            tr = ds.subset(plan.train_indices(f))
            te = ds.subset(plan.test_indices(f))
            try:
                model, _ = train(tr, arch, cfg)
            except TrainingDiverged:
                kappas = None
                break
            preds = predict_batch(model, te.features)
            cm = ConfusionMatrix.from_predictions(preds, te.labels, ds.class_count)
            kappas.append(cohen_kappa(cm))
        score = -math.inf if kappas is None else float(np.mean(kappas))
        log.append({
            "draw": i,
            "arch": list(arch),
            "l2": l2,
            "fold_kappas": None if kappas is None else [float(k) for k in kappas],
            "mean_kappa": None if kappas is None else score,
            "diverged": kappas is None,
        })
        if score > best_score:
            best_idx, best_score = i, score
    winner = log[best_idx]
    return SearchResult(tuple(winner["arch"]), winner["l2"], tuple(log))


def network_to_dict(m: NetworkModel) -> dict:
    return {
        "family": "network",
        "dimension": m.dimension,
        "class_count": m.class_count,
        "widths": [int(W.shape[1]) for W in m.weights],
        "weights": [[list(map(float, row)) for row in W] for W in m.weights],
        "biases": [list(map(float, b)) for b in m.biases],
    }


def network_from_dict(d: dict) -> NetworkModel:
    return NetworkModel(
        weights=tuple(np.array(W, dtype=np.float64) for W in d["weights"]),
        biases=tuple(np.array(b, dtype=np.float64) for b in d["biases"]),
        dimension=int(d["dimension"]),
        class_count=int(d["class_count"]),
    )
