"""Partition-and-vote geometry: activation codes, exact 2-D cell
enumeration, grid labeling, per-cell posteriors, and SVG rendering."""

from .codes import (
    ActivationCode,
    activation_code,
    batch_codes,
    code_table,
    model_depth,
    resolve_layer,
)
from .grid import GridLabels, color_for_code, label_grid
from .lp import clip_polygon, feasible_point
from .regions import (
    RegionCell,
    cell_posteriors,
    enumerate_forest_regions_2d,
    enumerate_regions_2d,
    regions_to_json,
    tree_leaf_cells,
)
from .render import render_partition_svg

__all__ = [
    "ActivationCode",
    "GridLabels",
    "RegionCell",
    "activation_code",
    "batch_codes",
    "cell_posteriors",
    "clip_polygon",
    "code_table",
    "color_for_code",
    "enumerate_forest_regions_2d",
    "enumerate_regions_2d",
    "feasible_point",
    "label_grid",
    "model_depth",
    "regions_to_json",
    "render_partition_svg",
    "resolve_layer",
    "tree_leaf_cells",
]
