"""Initial island shapes, sampled uniformly in exact arc length.

Every builder places nodes on the ideal geometry (edges and circular arcs)
rather than resampling a dense polyline, so refinement ladders see the
smooth shape and not a fixed polygonal approximation of it.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Curve

__all__ = ["tube_curve", "rectangle_curve", "trapezoid_curve", "tube_perimeter"]


def tube_perimeter(length: float = 4.0, height: float = 1.0) -> float:
    """Perimeter of the capped tube: two straight edges plus two semicircular
    caps of radius height/2 (together one full circle)."""
    return 2.0 * length + math.pi * height


def tube_curve(
    n_segments: int,
    length: float = 4.0,
    height: float = 1.0,
) -> Curve:
    """Closed tube: a length x height rectangle capped by two semicircles.

    The cap radius is height/2 so the boundary is C^1. Centered at the
    origin, traversed clockwise (top edge rightward), nodes equally spaced
    in true arc length.
    """
    if n_segments < 8:
        raise ValueError(f"tube needs at least 8 segments, got {n_segments}")
    r = height / 2.0
    half = length / 2.0
    perim = tube_perimeter(length, height)
    s = np.arange(n_segments) * (perim / n_segments)
    x = np.empty(n_segments)
    y = np.empty(n_segments)

    cap = math.pi * r  # arc length of one semicircular cap
    top_end = length
    right_end = length + cap
    bottom_end = 2.0 * length + cap

    sel = s < top_end
    x[sel] = -half + s[sel]
    y[sel] = r
    sel = (s >= top_end) & (s < right_end)
    phi = math.pi / 2.0 - (s[sel] - top_end) / r
    x[sel] = half + r * np.cos(phi)
    y[sel] = r * np.sin(phi)
    sel = (s >= right_end) & (s < bottom_end)
    x[sel] = half - (s[sel] - right_end)
    y[sel] = -r
    sel = s >= bottom_end
    phi = -math.pi / 2.0 - (s[sel] - bottom_end) / r
    x[sel] = -half + r * np.cos(phi)
    y[sel] = r * np.sin(phi)
    return Curve(np.column_stack([x, y]), closed=True)


def _open_from_breakpoints(vertices: np.ndarray, n_segments: int) -> Curve:
    """Sample an open polyline of corner vertices uniformly in arc length."""
    seg = np.diff(vertices, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    stops = np.concatenate([[0.0], np.cumsum(lengths)])
    total = stops[-1]
    s = np.linspace(0.0, total, n_segments + 1)
    x = np.interp(s, stops, vertices[:, 0])
    y = np.interp(s, stops, vertices[:, 1])
    nodes = np.column_stack([x, y])
    nodes[0] = vertices[0]
    nodes[-1] = vertices[-1]
    nodes[0, 1] = 0.0
    nodes[-1, 1] = 0.0
    return Curve(nodes, closed=False)


def rectangle_curve(n_segments: int, width: float = 5.0, height: float = 1.0) -> Curve:
    """Open rectangle on the substrate, centered at x = 0.

    Traversed left contact -> up -> across the top -> down to the right
    contact; nodes equally spaced along the three edges.
    """
    if n_segments < 4:
        raise ValueError(f"rectangle needs at least 4 segments, got {n_segments}")
    if width <= 0 or height <= 0:
        raise ValueError("rectangle dimensions must be positive")
    w = width / 2.0
    vertices = np.array(
        [[-w, 0.0], [-w, height], [w, height], [w, 0.0]]
    )
    return _open_from_breakpoints(vertices, n_segments)


def trapezoid_curve(
    n_segments: int,
    top: float,
    bottom: float,
    height: float = 1.0,
) -> Curve:
    """Open trapezoid on the substrate, centered at x = 0.

    ``top`` and ``bottom`` are the two parallel widths (either may be the
    longer one); the slanted sides connect them.
    """
    if n_segments < 4:
        raise ValueError(f"trapezoid needs at least 4 segments, got {n_segments}")
    if top <= 0 or bottom <= 0 or height <= 0:
        raise ValueError("trapezoid dimensions must be positive")
    vertices = np.array(
        [
            [-bottom / 2.0, 0.0],
            [-top / 2.0, height],
            [top / 2.0, height],
            [bottom / 2.0, 0.0],
        ]
    )
    return _open_from_breakpoints(vertices, n_segments)
