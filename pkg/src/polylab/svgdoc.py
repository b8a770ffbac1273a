"""Tiny deterministic SVG writer.

Byte stability is the point: coordinates go through one fixed two-decimal
formatter, attributes are emitted in fixed order, and nothing time- or
platform-dependent is written. Good enough for partition maps and line
charts; not a general vector-graphics layer.
"""

from __future__ import annotations

import os
from xml.sax.saxutils import escape


def fmt(value: float) -> str:
    """Two-decimal fixed formatting with trailing zeros trimmed."""
    s = f"{float(value):.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


class SvgDoc:
    def __init__(self, width: int, height: int, background: str | None = None):
        self.width = int(width)
        self.height = int(height)
        self._parts: list[str] = [
            '<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
        ]
        if background is not None:
            self.rect(0, 0, self.width, self.height, fill=background)

    def _stroke_attrs(self, stroke, stroke_width, dash) -> str:
        attrs = ""
        if stroke is not None:
            attrs += f' stroke="{stroke}" stroke-width="{fmt(stroke_width)}"'
            if dash is not None:
                attrs += f' stroke-dasharray="{dash}"'
        return attrs

    def rect(self, x, y, w, h, fill, stroke=None, stroke_width=1.0,
             opacity=None, crisp=False):
        attrs = f' fill="{fill}"' + self._stroke_attrs(stroke, stroke_width, None)
        if opacity is not None:
            attrs += f' opacity="{fmt(opacity)}"'
        if crisp:
            attrs += ' shape-rendering="crispEdges"'
        self._parts.append(
            f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" '
            f'height="{fmt(h)}"{attrs}/>'
        )

    def line(self, x1, y1, x2, y2, stroke, stroke_width=1.0, dash=None,
             opacity=None):
        attrs = self._stroke_attrs(stroke, stroke_width, dash)
        if opacity is not None:
            attrs += f' opacity="{fmt(opacity)}"'
        self._parts.append(
            f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" '
            f'y2="{fmt(y2)}"{attrs}/>'
        )

    def _points(self, points) -> str:
        return " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)

    def polyline(self, points, stroke, stroke_width=1.0, opacity=None,
                 dash=None):
        attrs = self._stroke_attrs(stroke, stroke_width, dash)
        if opacity is not None:
            attrs += f' opacity="{fmt(opacity)}"'
        self._parts.append(
            f'<polyline points="{self._points(points)}" fill="none"'
            f'{attrs} stroke-linejoin="round"/>'
        )

    def polygon(self, points, fill, stroke=None, stroke_width=1.0,
                opacity=None):
        attrs = f' fill="{fill}"' + self._stroke_attrs(stroke, stroke_width, None)
        if opacity is not None:
            attrs += f' opacity="{fmt(opacity)}"'
        self._parts.append(f'<polygon points="{self._points(points)}"{attrs}/>')

    def circle(self, cx, cy, r, fill, stroke=None, stroke_width=1.0,
               opacity=None):
        attrs = f' fill="{fill}"' + self._stroke_attrs(stroke, stroke_width, None)
        if opacity is not None:
            attrs += f' opacity="{fmt(opacity)}"'
        self._parts.append(
            f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(r)}"{attrs}/>'
        )

    def text(self, x, y, content, size=12, fill="#333333", anchor="start",
             rotate=None, bold=False):
        transform = ""
        if rotate is not None:
            transform = f' transform="rotate({fmt(rotate)} {fmt(x)} {fmt(y)})"'
        weight = ' font-weight="bold"' if bold else ""
        self._parts.append(
            f'<text x="{fmt(x)}" y="{fmt(y)}" font-family="sans-serif" '
            f'font-size="{fmt(size)}" fill="{fill}" '
            f'text-anchor="{anchor}"{weight}{transform}>'
            f"{escape(str(content))}</text>"
        )

    def tostring(self) -> str:
        return "\n".join(self._parts) + "\n</svg>\n"

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.tostring())
