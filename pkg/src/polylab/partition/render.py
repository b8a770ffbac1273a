"""Partition maps as SVG.

Three modes: "unique-color" fills every region with its hash color;
"class-tint" colors regions by majority class, washed out toward white as
the posterior approaches uniform, with neutral gray for sample-free
regions; "layer-overlay" renders the final partition and strokes the
coarser boundaries of earlier layers on top. Output bytes are
deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..svgdoc import SvgDoc
from .grid import GridLabels, color_for_code
from .regions import RegionCell

MODES = ("unique-color", "class-tint", "layer-overlay")

CLASS_PALETTE = (
    "#7b3294",  # class 0: purple
    "#008837",  # class 1: green
    "#d7191c",
    "#2c7bb6",
    "#e66101",
    "#4dac26",
    "#313695",
    "#a50026",
)
NEUTRAL = "#d9d9d9"

# (stroke width, opacity) per overlay depth, earliest layer first
_OVERLAY_STYLE = ((2.5, 0.9), (1.8, 0.75), (1.2, 0.6), (1.0, 0.5))


def _mix_with_white(color: str, weight: float) -> str:
    w = min(max(weight, 0.0), 1.0)
    parts = [int(color[i:i + 2], 16) for i in (1, 3, 5)]
    mixed = [round(255 * (1 - w) + p * w) for p in parts]
    return "#%02x%02x%02x" % tuple(mixed)


def class_tint(posterior: np.ndarray | None) -> str:
    """Majority-class color scaled by how far the vote is from uniform."""
    if posterior is None:
        return NEUTRAL
    k = int(np.argmax(posterior))
    base = CLASS_PALETTE[k % len(CLASS_PALETTE)]
    uniform = 1.0 / len(posterior)
    strength = (float(posterior[k]) - uniform) / (1.0 - uniform)
    return _mix_with_white(base, 0.12 + 0.88 * strength)


class _Frame:
    """Maps domain coordinates to pixels, y flipped."""

    def __init__(self, domain, size: int, pad: float = 12.0):
        self.xmin, self.xmax, self.ymin, self.ymax = domain
        self.pad = pad
        self.span = size - 2 * pad

    def x(self, v: float) -> float:
        return self.pad + (v - self.xmin) / (self.xmax - self.xmin) * self.span

    def y(self, v: float) -> float:
        return self.pad + self.span - (v - self.ymin) / (self.ymax - self.ymin) * self.span


def _domain_of(source) -> tuple[float, float, float, float]:
    if isinstance(source, GridLabels):
        return source.domain
    points = np.vstack([c.polygon for c in source if len(c.polygon)])
    return (
        float(points[:, 0].min()), float(points[:, 0].max()),
        float(points[:, 1].min()), float(points[:, 1].max()),
    )


def _region_fill(source, mode: str):
    """Region id (or cell index) to fill color."""
    if isinstance(source, GridLabels):
        if mode == "unique-color":
            return list(source.colors)
        if source.posterior is None:
            raise InvalidArgument(
                "class-tint needs posteriors; run cell_posteriors first"
            )
        return [class_tint(p) for p in source.posterior]
    if mode == "unique-color":
        return [color_for_code(c.code) for c in source]
    if any(c.sample_count is None for c in source):
        raise InvalidArgument(
            "class-tint needs posteriors; run cell_posteriors first"
        )
    return [class_tint(c.posterior) for c in source]


def _paint_grid(doc: SvgDoc, grid: GridLabels, frame: _Frame, fills) -> None:
    res = grid.resolution
    cw = frame.span / res
    for i in range(res):
        y_top = frame.pad + (res - 1 - i) * cw
        row = grid.ids[i]
        j = 0
        while j < res:
            k = j
            while k + 1 < res and row[k + 1] == row[j]:
                k += 1
            doc.rect(
                frame.pad + j * cw, y_top,
                (k - j + 1) * cw + 0.4, frame.span / res + 0.4,
                fill=fills[row[j]], crisp=True,
            )
            j = k + 1


def _paint_cells(doc: SvgDoc, cells, frame: _Frame, fills) -> None:
    for idx, cell in enumerate(cells):
        if len(cell.polygon) < 3:
            continue
        points = [(frame.x(px), frame.y(py)) for px, py in cell.polygon]
        doc.polygon(points, fill=fills[idx], stroke=fills[idx], stroke_width=0.6)


def _stroke_boundaries(doc: SvgDoc, source, frame: _Frame, style) -> None:
    width, opacity = style
    if isinstance(source, GridLabels):
        ids = source.ids
        res = source.resolution
        step = frame.span / res
        vertical = ids[:, 1:] != ids[:, :-1]
        for j in range(res - 1):
            x = frame.pad + (j + 1) * step
            i = 0
            while i < res:
                if not vertical[i, j]:
                    i += 1
                    continue
                k = i
                while k + 1 < res and vertical[k + 1, j]:
                    k += 1
                y_hi = frame.pad + (res - i) * step
                y_lo = frame.pad + (res - 1 - k) * step
                doc.line(x, y_lo, x, y_hi, stroke="#1a1a1a",
                         stroke_width=width, opacity=opacity)
                i = k + 1
        horizontal = ids[1:, :] != ids[:-1, :]
        for i in range(res - 1):
            y = frame.pad + (res - 1 - i) * step
            j = 0
            while j < res:
                if not horizontal[i, j]:
                    j += 1
                    continue
                k = j
                while k + 1 < res and horizontal[i, k + 1]:
                    k += 1
                doc.line(frame.pad + j * step, y, frame.pad + (k + 1) * step, y,
                         stroke="#1a1a1a", stroke_width=width, opacity=opacity)
                j = k + 1
    else:
        for cell in source:
            if len(cell.polygon) < 2:
                continue
            points = [(frame.x(px), frame.y(py)) for px, py in cell.polygon]
            doc.polygon(points, fill="none", stroke="#1a1a1a",
                        stroke_width=width, opacity=opacity)


def render_partition_svg(source, out, mode: str = "unique-color", *,
                         overlays=(), size: int = 640) -> None:
    """Write a partition map for a GridLabels or a list of RegionCells.

    ``overlays`` (layer-overlay mode) lists earlier-layer partitions,
    coarsest first; their boundaries are stroked atop the base fill.
    """
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}")
    if not isinstance(source, GridLabels) and not (
        isinstance(source, (list, tuple)) and source
        and isinstance(source[0], RegionCell)
    ):
        raise InvalidArgument("source must be a GridLabels or RegionCell list")

    domain = _domain_of(source)
    frame = _Frame(domain, size)
    doc = SvgDoc(size, size, background="#ffffff")
    if mode == "layer-overlay":
        has_posteriors = (
            source.posterior is not None if isinstance(source, GridLabels)
            else all(c.sample_count is not None for c in source)
        )
        base_mode = "class-tint" if has_posteriors else "unique-color"
    else:
        base_mode = mode
    fills = _region_fill(source, base_mode)
    if isinstance(source, GridLabels):
        _paint_grid(doc, source, frame, fills)
    else:
        _paint_cells(doc, source, frame, fills)
    if mode == "layer-overlay":
        for depth, earlier in enumerate(overlays):
            style = _OVERLAY_STYLE[min(depth, len(_OVERLAY_STYLE) - 1)]
            _stroke_boundaries(doc, earlier, frame, style)
    doc.rect(frame.pad, frame.pad, frame.span, frame.span, fill="none",
             stroke="#333333", stroke_width=1.0)
    doc.save(out)
