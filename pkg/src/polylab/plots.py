"""Learning-curve charts: thin per-dataset lines, a thick center line per
family, and a shaded interquartile band, on a log-scaled sample-size axis.
Rendered with the deterministic SVG writer, so identical inputs give
identical bytes."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgument
from .svgdoc import SvgDoc

FAMILY_COLORS = {"forest": "#d95f02", "network": "#1b9e77"}


@dataclass(frozen=True)
class Series:
    label: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]
    color: str
    width: float = 1.0
    opacity: float = 1.0
    markers: bool = False


@dataclass(frozen=True)
class Band:
    xs: tuple[float, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    color: str
    opacity: float = 0.18


def _tick_label(v: float) -> str:
    if v != 0 and abs(v) >= 1 and abs(v) < 1e6 and v == int(v):
        return str(int(v))
    return f"{v:g}"


def _log_ticks(lo: float, hi: float) -> list[float]:
    """Ticks at 1/2/5 per decade, thinned to full decades when crowded."""
    ticks = []
    k = math.floor(math.log10(lo))
    while 10.0 ** k <= hi * 1.0001:
        for m in (1.0, 2.0, 5.0):
            v = m * 10.0 ** k
            if lo * 0.9999 <= v <= hi * 1.0001:
                ticks.append(v)
        k += 1
    if len(ticks) > 8:
        ticks = [t for t in ticks if math.log10(t) == math.floor(math.log10(t))]
    return ticks or [lo, hi]


def _linear_ticks(lo: float, hi: float) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / 5
    power = math.floor(math.log10(raw))
    step = 10.0 ** power
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if mult * 10.0 ** power >= raw:
            step = mult * 10.0 ** power
            break
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return ticks


class _Axis:
    def __init__(self, lo: float, hi: float, pix_lo: float, pix_hi: float,
                 log: bool):
        if log and lo <= 0:
            raise InvalidArgument("log axis needs positive values")
        if hi <= lo:
            pad = abs(lo) * 0.1 + 1e-9
            lo, hi = lo - pad, hi + pad
        self.lo, self.hi, self.log = lo, hi, log
        self.pix_lo, self.pix_hi = pix_lo, pix_hi

    def pix(self, v: float) -> float:
        if self.log:
            f = (math.log(v) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))
        else:
            f = (v - self.lo) / (self.hi - self.lo)
        return self.pix_lo + f * (self.pix_hi - self.pix_lo)

    def ticks(self) -> list[float]:
        return _log_ticks(self.lo, self.hi) if self.log \
            else _linear_ticks(self.lo, self.hi)


def _data_range(series, bands, pick_x: bool):
    vals = []
    for s in series:
        vals.extend(s.xs if pick_x else s.ys)
    for b in bands:
        vals.extend(b.xs if pick_x else (*b.lo, *b.hi))
    vals = [v for v in vals if not math.isnan(v)]
    if not vals:
        raise InvalidArgument("nothing to plot")
    return min(vals), max(vals)


def line_chart(out, series, *, bands=(), x_label: str = "",
               y_label: str = "", title: str | None = None,
               log_x: bool = True, log_y: bool = False,
               legend=(), width: int = 720, height: int = 480) -> None:
    """Write a line chart; ``legend`` is a list of (label, color) pairs."""
    series = [s for s in series if len(s.xs) > 0]
    if not series:
        raise InvalidArgument("nothing to plot")
    left, right, top, bottom = 64, 18, 34 if title else 16, 48
    doc = SvgDoc(width, height, background="#ffffff")
    x_lo, x_hi = _data_range(series, bands, pick_x=True)
    y_lo, y_hi = _data_range(series, bands, pick_x=False)
    if not log_y:
        pad = 0.06 * (y_hi - y_lo if y_hi > y_lo else abs(y_hi) + 1)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    else:
        y_lo, y_hi = y_lo / 1.5, y_hi * 1.5
    x_axis = _Axis(x_lo, x_hi, left, width - right, log_x)
    y_axis = _Axis(y_lo, y_hi, height - bottom, top, log_y)

    for tick in x_axis.ticks():
        px = x_axis.pix(tick)
        doc.line(px, top, px, height - bottom, stroke="#e3e3e3")
        doc.text(px, height - bottom + 16, _tick_label(tick), size=11,
                 anchor="middle", fill="#555555")
    for tick in y_axis.ticks():
        py = y_axis.pix(tick)
        doc.line(left, py, width - right, py, stroke="#e3e3e3")
        doc.text(left - 6, py + 4, _tick_label(tick), size=11,
                 anchor="end", fill="#555555")

    for band in bands:
        if len(band.xs) < 2:
            continue
        pts = [(x_axis.pix(x), y_axis.pix(y)) for x, y in zip(band.xs, band.hi)]
        pts += [(x_axis.pix(x), y_axis.pix(y))
                for x, y in zip(reversed(band.xs), reversed(band.lo))]
        doc.polygon(pts, fill=band.color, opacity=band.opacity)

    for s in series:
        pts = [(x_axis.pix(x), y_axis.pix(y)) for x, y in zip(s.xs, s.ys)
               if not math.isnan(y)]
        if len(pts) >= 2:
            doc.polyline(pts, stroke=s.color, stroke_width=s.width,
                         opacity=None if s.opacity >= 1 else s.opacity)
        for px, py in (pts if (s.markers or len(pts) == 1) else ()):
            doc.circle(px, py, max(2.0, s.width), fill=s.color,
                       opacity=None if s.opacity >= 1 else s.opacity)

    doc.line(left, height - bottom, width - right, height - bottom,
             stroke="#333333", stroke_width=1.2)
    doc.line(left, top, left, height - bottom, stroke="#333333",
             stroke_width=1.2)
    if x_label:
        doc.text((left + width - right) / 2, height - 12, x_label, size=12,
                 anchor="middle")
    if y_label:
        doc.text(16, (top + height - bottom) / 2, y_label, size=12,
                 anchor="middle", rotate=-90)
    if title:
        doc.text(left, 20, title, size=14, bold=True)
    for i, (label, color) in enumerate(legend):
        y = top + 10 + 18 * i
        doc.rect(width - right - 150, y - 8, 18, 8, fill=color)
        doc.text(width - right - 126, y, label, size=11, fill="#333333")
    doc.save(out)
