"""CART decision trees with per-node random feature subsets, bootstrap
ensembles, leaf posterior estimates, and soft-vote prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .data import Dataset
from .errors import InvalidArgument

DEFAULT_TREE_COUNT = 500


@dataclass
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (posterior).

    Points with x[feature] <= threshold route left. Leaves hold the
    empirical class-frequency posterior of their training samples.
    """

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    posterior: np.ndarray | None = None
    count: int = 0
    cell_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray,
                features: np.ndarray, class_count: int):
    """Maximize sum(left_counts^2)/n_left + sum(right_counts^2)/n_right.

    Equivalent to minimizing weighted Gini impurity; the score is computed
    from exact integer class counts so ties resolve deterministically
    (lowest feature index, then lowest threshold).
    """
    m = len(idx)
    y_node = y[idx]
    best = None  # (score, feature, threshold)
    for f in features:
        xv = X[idx, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        cut = np.nonzero(xs[1:] > xs[:-1])[0]
        if cut.size == 0:
            continue
        onehot = np.zeros((m, class_count), dtype=np.int64)
        onehot[np.arange(m), y_node[order]] = 1
        cums = np.cumsum(onehot, axis=0)
        cl = cums[cut]
        nl = (cut + 1).astype(np.float64)
        nr = m - nl
        score = (cl * cl).sum(axis=1) / nl + \
            ((cums[-1] - cl) * (cums[-1] - cl)).sum(axis=1) / nr
        j = int(np.argmax(score))
        if best is None or score[j] > best[0]:
            lo, hi = xs[cut[j]], xs[cut[j] + 1]
            thr = lo + (hi - lo) / 2.0
            if thr >= hi:  # adjacent floats: keep the split valid
                thr = lo
            best = (float(score[j]), int(f), float(thr))
    return best


def train_tree(ds: Dataset, max_features: int,
               seed: int | np.random.Generator = 0) -> TreeNode:
    """Grow a CART tree greedily until every leaf is pure or indivisible.

    At each node ``max_features`` features are sampled without replacement;
    candidate thresholds are midpoints between consecutive distinct sorted
    values; a node splits only if weighted Gini impurity strictly decreases.
    """
    if ds.n < 1:
        raise InvalidArgument("empty dataset")
    if not (1 <= max_features <= ds.d):
        raise InvalidArgument("max_features must be in [1, d]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X, y, C = ds.features, ds.labels, ds.class_count
    root = TreeNode()
    next_cell = 0
    # Explicit stack (left pushed last, so processed first) keeps the rng
    # draw order fixed and survives deep trees without recursion limits.
    stack: list[tuple[TreeNode, np.ndarray]] = [(root, np.arange(ds.n))]
    while stack:
        node, idx = stack.pop()
        counts = np.bincount(y[idx], minlength=C)
        best = None
        if counts.max() < len(idx):  # impure
            feats = np.sort(rng.choice(ds.d, size=max_features, replace=False))
            best = _best_split(X, y, idx, feats, C)
            if best is not None:
                parent_score = float((counts * counts).sum()) / len(idx)
                if not (best[0] > parent_score):
                    best = None
        if best is None:
            node.posterior = counts / len(idx)
            node.count = len(idx)
            node.cell_id = next_cell
            next_cell += 1
            continue
        _, node.feature, node.threshold = best
        go_left = X[idx, node.feature] <= node.threshold
        node.left, node.right = TreeNode(), TreeNode()
        stack.append((node.right, idx[~go_left]))
        stack.append((node.left, idx[go_left]))
    return root


class FlatTree:
    """Array form of a tree for vectorized routing.

    Also records each leaf's root-to-leaf branch string ('0' = left,
    '1' = right), which is the tree's contribution to activation codes.
    """

    def __init__(self, root: TreeNode):
        feature, threshold, left, right, leaf_ord = [], [], [], [], []
        self.leaf_posteriors: list[np.ndarray] = []
        self.leaf_paths: list[str] = []
        self.leaf_cell_ids: list[int] = []
        stack = [(root, "", -1, "")]
        while stack:
            node, path, parent, side = stack.pop()
            pos = len(feature)
            if parent >= 0:
                (left if side == "l" else right)[parent] = pos
            feature.append(node.feature)
            threshold.append(node.threshold)
            left.append(-1)
            right.append(-1)
            if node.is_leaf:
                leaf_ord.append(len(self.leaf_posteriors))
                self.leaf_posteriors.append(np.asarray(node.posterior))
                self.leaf_paths.append(path)
                self.leaf_cell_ids.append(node.cell_id)
            else:
                leaf_ord.append(-1)
                stack.append((node.right, path + "1", pos, "r"))
                stack.append((node.left, path + "0", pos, "l"))
        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=np.float64)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.leaf_ord = np.array(leaf_ord, dtype=np.int64)
        self.depth = max((len(p) for p in self.leaf_paths), default=0)
        self.posterior_matrix = np.vstack(self.leaf_posteriors)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf ordinal (index into leaf_* lists) for each row of X."""
        cur = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[cur]
            active = np.nonzero(f >= 0)[0]
            if active.size == 0:
                break
            sub = cur[active]
            go_left = X[active, f[active]] <= self.threshold[sub]
            cur[active] = np.where(go_left, self.left[sub], self.right[sub])
        return self.leaf_ord[cur]


@dataclass(frozen=True)
class ForestModel:
    """Bootstrap ensemble of CART trees with soft-vote posteriors."""

    trees: tuple[TreeNode, ...]
    tree_count: int
    max_features: int
    bootstrap_seeds: tuple[int, ...]
    dimension: int
    class_count: int
    bootstrap: bool = True
    criterion: str = "gini"

    @cached_property
    def flat_trees(self) -> tuple[FlatTree, ...]:
        return tuple(FlatTree(t) for t in self.trees)

    @property
    def depth(self) -> int:
        return max(ft.depth for ft in self.flat_trees)


def train_forest(ds: Dataset, tree_count: int = DEFAULT_TREE_COUNT,
                 max_features: int | None = None, seed: int = 0,
                 bootstrap: bool = True) -> ForestModel:
    """Train ``tree_count`` CART trees, each on its own bootstrap resample.

    Per-tree 64-bit seeds are derived from the master seed and recorded on
    the model, so any single tree can be reproduced in isolation.
    """
    if tree_count < 1:
        raise InvalidArgument("tree_count must be >= 1")
    if max_features is None:
        max_features = ds.d
    if not (1 <= max_features <= ds.d):
        raise InvalidArgument("max_features must be in [1, d]")
    seeds = np.random.SeedSequence(seed).generate_state(tree_count, dtype=np.uint64)
    trees = []
    for t in range(tree_count):
        rng = np.random.default_rng(int(seeds[t]))
        if bootstrap:
            picks = rng.integers(0, ds.n, size=ds.n)
            sample = ds.subset(picks)
        else:
            sample = ds
        trees.append(train_tree(sample, max_features, rng))
    return ForestModel(
        trees=tuple(trees),
        tree_count=tree_count,
        max_features=max_features,
        bootstrap_seeds=tuple(int(s) for s in seeds),
        dimension=ds.d,
        class_count=ds.class_count,
        bootstrap=bootstrap,
    )


def _check_input(m: ForestModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != m.dimension:
        raise InvalidArgument(
            f"expected {m.dimension}-dimensional input, got {X.shape[1]}"
        )
    if not np.isfinite(X).all():
        raise InvalidArgument("input contains non-finite values")
    return X, squeeze


def forest_posterior_batch(m: ForestModel, X) -> np.ndarray:
    """Mean over trees of the containing leaf's posterior, one row per input."""
    X, _ = _check_input(m, X)
    out = np.zeros((len(X), m.class_count))
    for ft in m.flat_trees:
        out += ft.posterior_matrix[ft.apply(X)]
    return out / m.tree_count


def forest_posterior(m: ForestModel, x) -> np.ndarray:
    """Posterior for a single d-vector."""
    return forest_posterior_batch(m, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]


def forest_predict_batch(m: ForestModel, X) -> np.ndarray:
    """Argmax of the averaged posterior; ties break to the smaller class."""
    return np.argmax(forest_posterior_batch(m, X), axis=1)


def forest_predict(m: ForestModel, x) -> int:
    return int(forest_predict_batch(m, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def max_features_grid(d: int) -> tuple[int, ...]:
    """Candidate per-split feature counts: sqrt(d), d/4, d/3, d/1.5, and d.

    Rounded half-up, floored at 1, deduplicated ascending.
    """
    if d < 1:
        raise InvalidArgument("d must be >= 1")
    raw = [math.sqrt(d), d / 4.0, d / 3.0, d / 1.5, float(d)]
    vals = sorted({max(1, int(math.floor(v + 0.5))) for v in raw})
    return tuple(vals)


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {
            "posterior": [float(p) for p in node.posterior],
            "count": node.count,
            "cell_id": node.cell_id,
        }
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(d: dict) -> TreeNode:
    if "posterior" in d:
        return TreeNode(
            posterior=np.array(d["posterior"], dtype=np.float64),
            count=int(d["count"]),
            cell_id=int(d["cell_id"]),
        )
    return TreeNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        left=tree_from_dict(d["left"]),
        right=tree_from_dict(d["right"]),
    )


def forest_to_dict(m: ForestModel) -> dict:
    return {
        "family": "forest",
        "dimension": m.dimension,
        "class_count": m.class_count,
        "tree_count": m.tree_count,
        "max_features": m.max_features,
        "bootstrap": m.bootstrap,
        "criterion": m.criterion,
        "bootstrap_seeds": list(m.bootstrap_seeds),
        "trees": [tree_to_dict(t) for t in m.trees],
    }


def forest_from_dict(d: dict) -> ForestModel:
    return ForestModel(
        trees=tuple(tree_from_dict(t) for t in d["trees"]),
        tree_count=int(d["tree_count"]),
        max_features=int(d["max_features"]),
        bootstrap_seeds=tuple(int(s) for s in d["bootstrap_seeds"]),
        dimension=int(d["dimension"]),
        class_count=int(d["class_count"]),
        bootstrap=bool(d.get("bootstrap", True)),
        criterion=str(d.get("criterion", "gini")),
    )
