"""Grid labeling: activation codes sampled at the centers of an N x N
raster over a box. Region ids are assigned by first appearance scanning
y-major, x-minor; colors come from a hash of the code, so they carry no
meaning but are stable across runs."""

from __future__ import annotations

import colorsys
import hashlib
from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import InvalidArgument
from ..network import NetworkModel
from .codes import ActivationCode, code_table, resolve_layer


@dataclass
class GridLabels:
    """ids[i, j] is the region id at the center of raster cell (row i from
    ymin, column j from xmin); codes/colors are indexed by region id."""

    ids: np.ndarray
    codes: tuple[ActivationCode, ...]
    colors: tuple[str, ...]
    domain: tuple[float, float, float, float]
    resolution: int
    layer_limit: int
    family: str
    sample_count: np.ndarray | None = None
    posterior: tuple | None = None

    @property
    def region_count(self) -> int:
        return len(self.codes)


def color_for_code(code: ActivationCode) -> str:
    """Stable arbitrary color: hash to hue/saturation/lightness."""
    digest = hashlib.sha256(f"{code.family}:{code.concat()}".encode()).digest()
    hue = ((digest[0] << 8) | digest[1]) % 360
    light = 0.40 + 0.30 * digest[2] / 255
    sat = 0.45 + 0.35 * digest[3] / 255
    r, g, b = colorsys.hls_to_rgb(hue / 360.0, light, sat)
    return "#%02x%02x%02x" % (round(255 * r), round(255 * g), round(255 * b))


def grid_centers(domain, resolution: int):
    xmin, xmax, ymin, ymax = domain
    xs = xmin + (np.arange(resolution) + 0.5) * (xmax - xmin) / resolution
    ys = ymin + (np.arange(resolution) + 0.5) * (ymax - ymin) / resolution
    return xs, ys


def label_grid(model, domain, resolution: int,
               layer: int | None = None) -> GridLabels:
    """Code every raster-cell center; equal codes share an id and color."""
    if resolution < 2:
        raise InvalidArgument("resolution must be >= 2")
    limit = resolve_layer(model, layer)
    xmin, xmax, ymin, ymax = (float(v) for v in domain)
    if not (xmin < xmax and ymin < ymax):
        raise InvalidArgument("degenerate domain box")
    xs, ys = grid_centers((xmin, xmax, ymin, ymax), resolution)
    grid_x, grid_y = np.meshgrid(xs, ys)
    points = np.column_stack([grid_x.ravel(), grid_y.ravel()])
    ids, codes = code_table(model, points, limit)
    colors = tuple(color_for_code(c) for c in codes)
    family = "network" if isinstance(model, NetworkModel) else "forest"
    return GridLabels(
        ids=ids.reshape(resolution, resolution),
        codes=tuple(codes),
        colors=colors,
        domain=(xmin, xmax, ymin, ymax),
        resolution=resolution,
        layer_limit=limit,
        family=family,
    )


def grid_posteriors(grid: GridLabels, model, ds: Dataset) -> GridLabels:
    """Per-region class counts and posteriors from training points."""
    ids, codes = code_table(model, ds.features, grid.layer_limit)
    region_index = {code: i for i, code in enumerate(grid.codes)}
    code_to_region = np.array(
        [region_index.get(c, -1) for c in codes], dtype=np.int64
    )
    point_region = code_to_region[ids]
    hit = point_region >= 0
    counts = np.zeros((grid.region_count, ds.class_count), dtype=np.int64)
    np.add.at(counts, (point_region[hit], ds.labels[hit]), 1)
    grid.sample_count = counts
    grid.posterior = tuple(
        counts[i] / counts[i].sum() if counts[i].sum() > 0 else None
        for i in range(grid.region_count)
    )
    return grid
