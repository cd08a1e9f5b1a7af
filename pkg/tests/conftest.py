"""Shared curve builders for the test suite.

All builders follow the package convention: material on the right of the
traversal, so closed curves are stored clockwise (in x-right, y-up axes)
and open curves run from the left contact point over the top to the right
contact point.
"""

import numpy as np
import pytest

from dewet2d.geometry import Curve, resample


def regular_polygon(m: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> Curve:
    """Closed regular m-gon inscribed in a circle, clockwise storage."""
    ang = phase - 2.0 * np.pi * np.arange(m) / m
    nodes = np.column_stack(
        [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)]
    )
    return Curve(nodes, closed=True)


def open_rectangle(width: float, height: float, n_segments: int) -> Curve:
    """Open island boundary: three sides of a rectangle sitting on y = 0.

    Runs left contact -> top -> right contact and is resampled to
    ``n_segments`` uniform segments (corner nodes are generally not kept,
    matching a uniform arc-length division of the boundary).
    """
    w, h = width / 2.0, height
    corners = np.array([[-w, 0.0], [-w, h], [w, h], [w, 0.0]])
    dense = [corners[:1]]
    for a, b in zip(corners[:-1], corners[1:]):
        t = np.linspace(0.0, 1.0, 200)[1:, None]
        dense.append(a + t * (b - a))
    return resample(Curve(np.vstack(dense), closed=False), n_segments)


def project_onto_polyline(points: np.ndarray, curve: Curve):
    """Arc parameter and distance of each point's closest polyline point.

    Straightforward per-segment projection, kept independent of the package
    internals so tests can use it as an oracle.
    """
    pts = curve.nodes
    if curve.closed:
        pts = np.vstack([pts, pts[:1]])
    a, b = pts[:-1], pts[1:]
    ab = b - a
    seg_len = np.hypot(*ab.T)
    s0 = np.concatenate([[0.0], np.cumsum(seg_len)])[:-1]
    params = np.empty(len(points))
    dists = np.empty(len(points))
    for i, p in enumerate(points):
        t = np.einsum("ij,ij->i", p - a, ab) / seg_len**2
        t = np.clip(t, 0.0, 1.0)
        foot = a + t[:, None] * ab
        d = np.hypot(*(p - foot).T)
        j = int(np.argmin(d))
        dists[i] = d[j]
        params[i] = s0[j] + t[j] * seg_len[j]
    return params, dists


@pytest.fixture
def rng():
    return np.random.default_rng(20260821)
