"""Planar half-space feasibility via Seidel's randomized incremental LP.

Constraints use the convention normal . x <= offset. Feasibility is tested
with a strict-interior margin: every constraint must hold with slack
``margin * ||normal||``, so regions thinner than the margin count as empty
and collapse into their neighbor. All expected-linear-time machinery runs
over a handful of constraints per cell, with a fixed RNG seed so witnesses
are reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument

MARGIN = 1e-9

# Objective direction (cos 1, sin 1): not parallel to any axis-aligned
# constraint, so ties on vertical/horizontal edges are rare.
_OBJ = np.array([0.5403023058681398, 0.8414709848078965])

_PARALLEL_TOL = 1e-14
_FEAS_TOL = 1e-12


def _check_box(box) -> tuple[float, float, float, float]:
    xmin, xmax, ymin, ymax = (float(v) for v in box)
    if not (xmin < xmax and ymin < ymax):
        raise InvalidArgument("degenerate domain box")
    return xmin, xmax, ymin, ymax


def _normalized(halfspaces, margin: float):
    """Unit-normal constraints with offsets shrunk by the margin.

    Returns None if some constraint with a vanishing normal is infeasible;
    such constraints are otherwise dropped (they exclude nothing).
    """
    out = []
    for a, b in halfspaces:
        ax, ay = float(a[0]), float(a[1])
        norm = np.hypot(ax, ay)
        if norm < 1e-300:
            if b < 0:
                return None
            continue
        out.append((np.array([ax / norm, ay / norm]), float(b) / norm - margin))
    return out


def _solve_on_line(a, b, active, tol_parallel=_PARALLEL_TOL, tol_feas=_FEAS_TOL):
    """Optimum of _OBJ on the segment of line a.x = b inside ``active``."""
    p0 = a * b
    d = np.array([-a[1], a[0]])
    lo, hi = -np.inf, np.inf
    for a2, b2 in active:
        den = a2 @ d
        num = b2 - a2 @ p0
        if abs(den) <= tol_parallel:
            if num < -tol_feas:
                return None
        elif den > 0:
            hi = min(hi, num / den)
        else:
            lo = max(lo, num / den)
    if lo > hi + tol_feas:
        return None
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    slope = _OBJ @ d
    if abs(slope) <= tol_parallel:
        t = 0.5 * (lo + hi)
    else:
        t = lo if slope > 0 else hi
    return p0 + t * d


def feasible_point(halfspaces, box, margin: float = MARGIN,
                   seed: int = 0) -> np.ndarray | None:
    """A point inside every half-space and the box, with margin slack.

    Seidel's incremental scheme: start at the box corner minimizing a
    fixed objective, insert the remaining constraints in a seeded random
    order, and re-solve on a constraint's boundary line only when the
    current point violates it. Returns None when the shrunk region is
    empty (the caller's sliver-merging policy).
    """
    xmin, xmax, ymin, ymax = _check_box(box)
    xmin, xmax = xmin + margin, xmax - margin
    ymin, ymax = ymin + margin, ymax - margin
    if not (xmin < xmax and ymin < ymax):
        return None
    cons = _normalized(halfspaces, margin)
    if cons is None:
        return None
    active = [
        (np.array([-1.0, 0.0]), -xmin),
        (np.array([1.0, 0.0]), xmax),
        (np.array([0.0, -1.0]), -ymin),
        (np.array([0.0, 1.0]), ymax),
    ]
    corners = [(x, y) for x in (xmin, xmax) for y in (ymin, ymax)]
    v = np.array(min(corners, key=lambda c: _OBJ[0] * c[0] + _OBJ[1] * c[1]))
    order = np.random.default_rng(seed).permutation(len(cons))
    for i in order:
        a, b = cons[i]
        if a @ v <= b + _FEAS_TOL:
            active.append((a, b))
            continue
        v = _solve_on_line(a, b, active)
        if v is None:
            return None
        active.append((a, b))
    return v


def clip_polygon(halfspaces, box) -> np.ndarray:
    """Box rectangle clipped by every half-space (Sutherland-Hodgman).

    Returns counterclockwise vertices, shape (k, 2); empty (0, 2) if the
    cell misses the box entirely.
    """
    xmin, xmax, ymin, ymax = _check_box(box)
    poly = [
        np.array([xmin, ymin]),
        np.array([xmax, ymin]),
        np.array([xmax, ymax]),
        np.array([xmin, ymax]),
    ]
    for a, b in halfspaces:
        a = np.asarray(a, dtype=np.float64)
        b = float(b)
        if not poly:
            break
        kept = []
        values = [a @ p - b for p in poly]
        for i, p in enumerate(poly):
            j = (i + 1) % len(poly)
            q, vp, vq = poly[j], values[i], values[j]
            if vp <= _FEAS_TOL:
                kept.append(p)
            if (vp <= _FEAS_TOL) != (vq <= _FEAS_TOL):
                t = vp / (vp - vq)
                kept.append(p + t * (q - p))
        poly = kept
    return np.array(poly) if poly else np.zeros((0, 2))
