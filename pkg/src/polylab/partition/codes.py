"""Activation codes: the per-layer on/off pattern a model assigns to a point.

Networks contribute one bit per hidden unit ('1' iff the pre-activation is
strictly positive; points exactly on a hyperplane read '0'). Forests
contribute one string per tree: the root-to-leaf branch directions
('0' = left, '1' = right), truncated at the layer limit and padded with '-'
where the path ended above it, so codes are fixed-length per tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from ..forest import ForestModel
from ..network import NetworkModel, forward_batch

ABSENT = "-"


@dataclass(frozen=True)
class ActivationCode:
    """Per-layer strings; equal codes mean equal per-layer activation sets."""

    family: str
    layers: tuple[str, ...]
    layer_limit: int

    def concat(self) -> str:
        """Layer-major, unit-minor flattening with '|' between layers."""
        return "|".join(self.layers)

    def to_hex(self) -> str:
        return self.concat().encode("ascii").hex()


def code_from_hex(family: str, layer_limit: int, hex_string: str) -> ActivationCode:
    concat = bytes.fromhex(hex_string).decode("ascii")
    layers = tuple(concat.split("|")) if concat else ()
    return ActivationCode(family, layers, layer_limit)


def model_depth(model) -> int:
    """Hidden layer count for networks; deepest tree depth for forests."""
    if isinstance(model, NetworkModel):
        return model.hidden_layer_count
    if isinstance(model, ForestModel):
        return model.depth
    raise InvalidArgument(f"unsupported model type {type(model).__name__}")


def resolve_layer(model, layer: int | None) -> int:
    """Default to full depth; a depth-0 forest still accepts layer 1."""
    top = max(model_depth(model), 1)
    if layer is None:
        return top
    layer = int(layer)
    if not (1 <= layer <= top):
        raise InvalidArgument(f"layer must be in [1, {top}], got {layer}")
    return layer


def _network_bit_matrix(model: NetworkModel, X: np.ndarray, layer: int):
    """(n, total units) uint8 matrix of post-ReLU positivity, plus widths."""
    _, acts = forward_batch(model, X)
    acts = acts[:layer]
    widths = [a.shape[1] for a in acts]
    bits = np.concatenate([a > 0 for a in acts], axis=1).astype(np.uint8)
    return bits, widths


def _forest_symbol_matrix(model: ForestModel, X: np.ndarray, layer: int):
    """(n, trees) int matrix of per-tree string ids, plus per-tree tables.

    Leaves that agree on the first ``layer`` branch directions share a
    string id, so truncation merges cells below the limit.
    """
    n = len(X)
    cols = np.empty((n, model.tree_count), dtype=np.int64)
    tables: list[list[str]] = []
    for t, flat in enumerate(model.flat_trees):
        width = min(layer, flat.depth)
        strings = [p[:layer].ljust(width, ABSENT) for p in flat.leaf_paths]
        seen: dict[str, int] = {}
        ids = np.empty(len(strings), dtype=np.int64)
        for i, s in enumerate(strings):
            ids[i] = seen.setdefault(s, len(seen))
        tables.append(list(seen))
        cols[:, t] = ids[flat.apply(X)]
    return cols, tables


def _check_points(model, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dimension:
        raise InvalidArgument(f"expected n x {model.dimension} input")
    if not np.isfinite(X).all():
        raise InvalidArgument("points contain non-finite values")
    return X


def batch_codes(model, X, layer: int | None = None) -> list[ActivationCode]:
    """Activation code of every row of X."""
    ids, codes = code_table(model, X, layer)
    return [codes[i] for i in ids]


def activation_code(model, x, layer: int | None = None) -> ActivationCode:
    return batch_codes(model, np.atleast_2d(np.asarray(x, dtype=np.float64)), layer)[0]


def code_table(model, X, layer: int | None = None):
    """Deduplicated coding of many points.

    Returns (ids, codes): ids[i] indexes into codes, and ids are assigned
    by first appearance in row order, so the labeling is deterministic.
    """
    layer = resolve_layer(model, layer)
    X = _check_points(model, X)
    if isinstance(model, NetworkModel):
        matrix, widths = _network_bit_matrix(model, X, layer)

        def build(row) -> ActivationCode:
            layers, at = [], 0
            for w in widths:
                layers.append("".join("1" if b else "0" for b in row[at:at + w]))
                at += w
            return ActivationCode("network", tuple(layers), layer)
    elif isinstance(model, ForestModel):
        matrix, tables = _forest_symbol_matrix(model, X, layer)

        def build(row) -> ActivationCode:
            return ActivationCode(
                "forest", tuple(tables[t][s] for t, s in enumerate(row)), layer
            )
    else:
        raise InvalidArgument(f"unsupported model type {type(model).__name__}")

    if len(X) == 0:
        return np.zeros(0, dtype=np.int64), []
    uniq, first, inverse = np.unique(
        matrix, axis=0, return_index=True, return_inverse=True
    )
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    ids = rank[inverse.ravel()]
    codes: list[ActivationCode] = [None] * len(uniq)
    for u, row in enumerate(uniq):
        codes[rank[u]] = build(row)
    return ids, codes
