"""Exact 2-D partition cells.

Networks: recursive half-plane refinement. Each hidden unit's
pre-activation is affine within a cell (composed through the cell's
affine map), so the unit contributes one candidate line per cell; cells
whose interior the line crosses split in two. After a layer is finished,
each cell's affine map absorbs the layer: A' = D W^T A, t' = D (W^T t + b)
with D the diagonal 0/1 matrix of that cell's ReLU signs.

Forests: every tree partitions the plane into axis-aligned leaf boxes,
and the ensemble partition is their common refinement, which is again a
set of boxes. Cell counts multiply across trees, so exact forest
enumeration is meant for small ensembles and figures, not 500-tree models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from ..errors import InvalidArgument
from ..forest import FlatTree, ForestModel, TreeNode
from ..network import NetworkModel
from .codes import ABSENT, ActivationCode, code_table, resolve_layer
from .lp import MARGIN, _check_box, clip_polygon, feasible_point


@dataclass
class RegionCell:
    """One cell of the model's input-space partition, clipped to a box.

    ``halfspaces`` (normal . x <= offset) lists only boundaries interior
    to the domain; the domain box itself is implicit. ``affine_map`` is
    (A, t) with A x + t the post-ReLU output of the last coded layer,
    valid on this cell only; None for forests. ``sample_count`` and
    ``posterior`` stay None until cell_posteriors fills them; a cell
    holding zero training points keeps posterior None and is flagged
    empty.
    """

    code: ActivationCode
    halfspaces: list[tuple[np.ndarray, float]]
    affine_map: tuple[np.ndarray, np.ndarray] | None
    witness: np.ndarray
    polygon: np.ndarray
    sample_count: np.ndarray | None = None
    posterior: np.ndarray | None = None

    @property
    def empty(self) -> bool:
        return self.sample_count is not None and int(self.sample_count.sum()) == 0


@dataclass
class _WorkCell:
    halfspaces: list = field(default_factory=list)
    witness: np.ndarray = None
    A: np.ndarray = None
    t: np.ndarray = None
    done: list[str] = field(default_factory=list)
    bits: list[str] = field(default_factory=list)


def enumerate_regions_2d(model: NetworkModel, domain,
                         layer: int | None = None) -> list[RegionCell]:
    """Every activation-code cell of a 2-input network over a box.

    Output cells have pairwise disjoint interiors and cover the box, up
    to the sliver-merging policy: a side thinner than the LP margin is
    absorbed by its sibling instead of becoming a cell.
    """
    if not isinstance(model, NetworkModel):
        raise InvalidArgument("exact enumeration needs a network model")
    if model.dimension != 2:
        raise InvalidArgument("exact enumeration is 2-D only")
    limit = resolve_layer(model, layer)
    xmin, xmax, ymin, ymax = _check_box(domain)
    box = (xmin, xmax, ymin, ymax)
    center = np.array([0.5 * (xmin + xmax), 0.5 * (ymin + ymax)])
    cells = [_WorkCell(witness=center, A=np.eye(2), t=np.zeros(2))]

    for l in range(limit):
        W, b = model.weights[l], model.biases[l]
        for k in range(W.shape[1]):
            nxt: list[_WorkCell] = []
            for cell in cells:
                g = cell.A.T @ W[:, k]
                c0 = float(W[:, k] @ cell.t + b[k])
                if float(np.hypot(g[0], g[1])) < 1e-12:
                    # unit is constant on this cell (dead ReLUs upstream or
                    # zero weights): no geometry, the bit is the bias sign
                    cell.bits.append("1" if c0 > 0 else "0")
                    nxt.append(cell)
                    continue
                on_side = float(g @ cell.witness) + c0 > 0
                if on_side:
                    own, own_bit = (-g, c0), "1"
                    other, other_bit = (g, -c0), "0"
                else:
                    own, own_bit = (g, -c0), "0"
                    other, other_bit = (-g, c0), "1"
                w_other = feasible_point(cell.halfspaces + [other], box)
                if w_other is None:
                    cell.bits.append(own_bit)
                    nxt.append(cell)
                    continue
                w_own = feasible_point(cell.halfspaces + [own], box)
                if w_own is None:
                    # own side is a sliver; the whole cell flips over
                    cell.witness = w_other
                    cell.bits.append(other_bit)
                    nxt.append(cell)
                    continue
                sibling = _WorkCell(
                    halfspaces=cell.halfspaces + [other],
                    witness=w_other,
                    A=cell.A,
                    t=cell.t,
                    done=list(cell.done),
                    bits=cell.bits + [other_bit],
                )
                cell.halfspaces = cell.halfspaces + [own]
                cell.witness = w_own
                cell.bits.append(own_bit)
                nxt.append(cell)
                nxt.append(sibling)
            cells = nxt
        for cell in cells:
            signs = np.array([bit == "1" for bit in cell.bits], dtype=np.float64)
            cell.A = signs[:, None] * (W.T @ cell.A)
            cell.t = signs * (W.T @ cell.t + b)
            cell.done.append("".join(cell.bits))
            cell.bits = []

    return [
        RegionCell(
            code=ActivationCode("network", tuple(c.done), limit),
            halfspaces=c.halfspaces,
            affine_map=(c.A, c.t),
            witness=c.witness,
            polygon=clip_polygon(c.halfspaces, box),
        )
        for c in cells
    ]


def _descend_boxes(flat: FlatTree, lo, hi, limit: int):
    """(lo, hi, padded branch string) per cell of one tree over a box."""
    pad_width = min(limit, flat.depth)
    stack = [(0, tuple(lo), tuple(hi), "")]
    out = []
    while stack:
        pos, lo, hi, path = stack.pop()
        f = flat.feature[pos]
        if f < 0 or len(path) >= limit:
            out.append((lo, hi, path.ljust(pad_width, ABSENT)))
            continue
        thr = float(flat.threshold[pos])
        if thr >= hi[f] - MARGIN:
            stack.append((flat.left[pos], lo, hi, path + "0"))
        elif thr <= lo[f] + MARGIN:
            stack.append((flat.right[pos], lo, hi, path + "1"))
        else:
            hi_l = list(hi)
            hi_l[f] = thr
            lo_r = list(lo)
            lo_r[f] = thr
            # right pushed first so the left child pops first
            stack.append((flat.right[pos], tuple(lo_r), hi, path + "1"))
            stack.append((flat.left[pos], lo, tuple(hi_l), path + "0"))
    return out


def _box_cell(code: ActivationCode, lo, hi, domain) -> RegionCell:
    xmin, xmax, ymin, ymax = domain
    halfspaces = []
    for f, (axis_lo, axis_hi) in enumerate(((xmin, xmax), (ymin, ymax))):
        e = np.zeros(2)
        e[f] = 1.0
        if lo[f] > axis_lo:
            halfspaces.append((-e, -lo[f]))
        if hi[f] < axis_hi:
            halfspaces.append((e, hi[f]))
    polygon = np.array([
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ])
    witness = np.array([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])])
    return RegionCell(code, halfspaces, None, witness, polygon)


def tree_leaf_cells(tree: FlatTree | TreeNode, domain,
                    layer: int | None = None) -> list[RegionCell]:
    """Axis-aligned leaf boxes of one tree, truncated at the layer limit."""
    flat = tree if isinstance(tree, FlatTree) else FlatTree(tree)
    domain = _check_box(domain)
    limit = max(flat.depth, 1) if layer is None else int(layer)
    if not (1 <= limit <= max(flat.depth, 1)):
        raise InvalidArgument(f"layer must be in [1, {max(flat.depth, 1)}]")
    lo, hi = (domain[0], domain[2]), (domain[1], domain[3])
    return [
        _box_cell(ActivationCode("forest", (path,), limit), blo, bhi, domain)
        for blo, bhi, path in _descend_boxes(flat, lo, hi, limit)
    ]


def enumerate_forest_regions_2d(model: ForestModel, domain,
                                layer: int | None = None) -> list[RegionCell]:
    """Common refinement of every tree's leaf boxes (still boxes)."""
    if not isinstance(model, ForestModel):
        raise InvalidArgument("expected a forest model")
    if model.dimension != 2:
        raise InvalidArgument("exact enumeration is 2-D only")
    limit = resolve_layer(model, layer)
    domain = _check_box(domain)
    cells = [((domain[0], domain[2]), (domain[1], domain[3]), ())]
    for flat in model.flat_trees:
        cells = [
            (blo, bhi, strings + (path,))
            for lo, hi, strings in cells
            for blo, bhi, path in _descend_boxes(flat, lo, hi, limit)
        ]
    return [
        _box_cell(ActivationCode("forest", strings, limit), lo, hi, domain)
        for lo, hi, strings in cells
    ]


def cell_posteriors(source, model, ds: Dataset):
    """Fill per-cell class counts and posteriors from training points.

    ``source`` is either a list of RegionCells or a GridLabels; it is
    updated in place and returned. Points whose code matches no cell
    (outside the enumerated domain) are ignored.
    """
    from .grid import GridLabels, grid_posteriors

    if isinstance(source, GridLabels):
        return grid_posteriors(source, model, ds)
    cells: list[RegionCell] = list(source)
    if not cells:
        raise InvalidArgument("no cells to attribute samples to")
    limit = cells[0].code.layer_limit
    ids, codes = code_table(model, ds.features, limit)
    cell_index = {cell.code: i for i, cell in enumerate(cells)}
    code_to_cell = np.array([cell_index.get(c, -1) for c in codes], dtype=np.int64)
    point_cell = code_to_cell[ids]
    hit = point_cell >= 0
    counts = np.zeros((len(cells), ds.class_count), dtype=np.int64)
    np.add.at(counts, (point_cell[hit], ds.labels[hit]), 1)
    for i, cell in enumerate(cells):
        total = int(counts[i].sum())
        cell.sample_count = counts[i].copy()
        cell.posterior = counts[i] / total if total > 0 else None
    return source


def regions_to_json(cells: list[RegionCell]) -> list[dict]:
    """Region inventory in a serialization-ready form."""
    out = []
    for cell in cells:
        out.append({
            "code": cell.code.to_hex(),
            "halfspaces": [
                [float(a[0]), float(a[1]), float(b)] for a, b in cell.halfspaces
            ],
            "posterior": None if cell.posterior is None
            else [float(p) for p in cell.posterior],
            "count": None if cell.sample_count is None
            else int(cell.sample_count.sum()),
        })
    return out
