"""Polyline curves and their discrete differential geometry.

A curve is an ordered list of planar nodes, either open with both endpoints
on the substrate line y = 0, or closed (last node joins back to the first,
stored once). Curves are traversed with the material on the right of the
direction of travel, so the left normal n = (-y_s, x_s) of every segment
points away from the material and the signed area integral y dx is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateGeometryError",
    "Curve",
    "SegmentFrames",
    "frames",
    "mesh_ratio",
    "redistribute",
    "resample",
    "enclosed_area",
]

# Segments shorter than this fraction of the total length are treated as
# degenerate: they carry no usable tangent direction for the schemes.
DEGENERATE_REL_TOL = 1e-12


class DegenerateGeometryError(ValueError):
    """A segment is too short relative to the curve to define a tangent."""


@dataclass(frozen=True)
class Curve:
    """Polyline interface curve.

    Parameters
    ----------
    nodes : (M, 2) float array
        Node coordinates in traversal order. For an open curve the M = N+1
        nodes span N segments and both endpoints lie exactly on y = 0 with
        x increasing from first to last. For a closed curve the M = N nodes
        span N segments, the last one joining node N-1 back to node 0.
    closed : bool
        Topology flag.
    """

    nodes: np.ndarray
    closed: bool = field(default=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError(f"nodes must be an (M, 2) array, got shape {nodes.shape}")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("nodes contain non-finite values")
        n_seg = nodes.shape[0] if self.closed else nodes.shape[0] - 1
        # a closed polyline needs 3 segments to bound area; an open one is
        # already meaningful with 2 (one interior node)
        if n_seg < (3 if self.closed else 2):
            raise ValueError(f"too few segments for this topology, got {n_seg}")
        diffs = np.diff(nodes, axis=0)
        if self.closed:
            diffs = np.vstack([diffs, nodes[:1] - nodes[-1:]])
        if np.any(np.all(diffs == 0.0, axis=1)):
            j = int(np.flatnonzero(np.all(diffs == 0.0, axis=1))[0])
            raise ValueError(f"consecutive nodes {j} and {j + 1} coincide")
        if not self.closed:
            if nodes[0, 1] != 0.0 or nodes[-1, 1] != 0.0:
                raise ValueError("open curve endpoints must lie exactly on y = 0")
            if not nodes[0, 0] < nodes[-1, 0]:
                raise ValueError("open curve must run from smaller to larger x")
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_segments(self) -> int:
        return self.nodes.shape[0] if self.closed else self.nodes.shape[0] - 1

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def segment_vectors(self) -> np.ndarray:
        """Forward difference of each segment, shape (n_segments, 2)."""
        if self.closed:
            return np.roll(self.nodes, -1, axis=0) - self.nodes
        return np.diff(self.nodes, axis=0)

    def with_nodes(self, nodes: np.ndarray) -> "Curve":
        return Curve(nodes, closed=self.closed)


@dataclass(frozen=True)
class SegmentFrames:
    """Per-segment geometry of a polyline curve.

    Segment i joins node i to node i+1 (modulo the node count when closed).
    ``theta`` is the planar angle of the forward tangent, atan2(y_s, x_s),
    and ``normal`` is the left normal (-y_s, x_s), outward for the stored
    material-on-the-right traversal.
    """

    tangent: np.ndarray  # (S, 2) unit tangents
    normal: np.ndarray  # (S, 2) unit outward normals
    theta: np.ndarray  # (S,) tangent angles in [-pi, pi]
    length: np.ndarray  # (S,) segment lengths
    total_length: float


def frames(curve: Curve) -> SegmentFrames:
    """Unit tangents, outward normals, orientations and lengths per segment.

    Raises
    ------
    DegenerateGeometryError
        If any segment is shorter than 1e-12 of the total length.
    """
    vec = curve.segment_vectors()
    length = np.hypot(vec[:, 0], vec[:, 1])
    total = float(length.sum())
    bad = length < DEGENERATE_REL_TOL * total
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise DegenerateGeometryError(
            f"segment {j} has length {length[j]:.3e}, "
            f"below {DEGENERATE_REL_TOL:g} of the total length {total:.3e}"
        )
    tangent = vec / length[:, None]
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    theta = np.arctan2(tangent[:, 1], tangent[:, 0])
    return SegmentFrames(tangent, normal, theta, length, total)


def mesh_ratio(curve: Curve) -> float:
    """Ratio of the longest to the shortest segment length (>= 1)."""
    length = frames(curve).length
    return float(length.max() / length.min())


def _arclength_table(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative arc length breakpoints and the matching node table.

    For closed curves the first node is appended again at s = L so that
    interpolation wraps around the full loop.
    """
    if curve.closed:
        pts = np.vstack([curve.nodes, curve.nodes[:1]])
    else:
        pts = curve.nodes
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return s, pts


def resample(curve: Curve, n_segments: int) -> Curve:
    """Sample ``n_segments`` equal arc-length segments on the polyline.

    Open curves keep both endpoints exactly; closed curves keep node 0 as
    the phase anchor. The new nodes lie on the original piecewise-linear
    curve.
    """
    if n_segments < (3 if curve.closed else 2):
        raise ValueError(f"too few segments for this topology, got {n_segments}")
    s, pts = _arclength_table(curve)
    total = s[-1]
    if curve.closed:
        targets = total * np.arange(n_segments) / n_segments
    else:
        targets = total * np.arange(n_segments + 1) / n_segments
    x = np.interp(targets, s, pts[:, 0])
    y = np.interp(targets, s, pts[:, 1])
    nodes = np.column_stack([x, y])
    nodes[0] = pts[0]
    if not curve.closed:
        nodes[-1] = pts[-1]
        nodes[0, 1] = 0.0
        nodes[-1, 1] = 0.0
    return Curve(nodes, closed=curve.closed)


def redistribute(curve: Curve) -> Curve:
    """Move the nodes to evenly spaced arc lengths along the same polyline."""
    return resample(curve, curve.n_segments)


def enclosed_area(curve: Curve) -> float:
    """Material area below the curve, A = integral y dx (trapezoid rule).

    For open curves the substrate closure contributes nothing because both
    endpoints sit on y = 0; for closed curves this is the shoelace area,
    positive in the stored material-on-the-right orientation.
    """
    pts = curve.nodes
    if curve.closed:
        x_next = np.roll(pts[:, 0], -1)
        y_next = np.roll(pts[:, 1], -1)
        return float(np.sum(0.5 * (y_next + pts[:, 1]) * (x_next - pts[:, 0])))
    y = pts[:, 1]
    x = pts[:, 0]
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * (x[1:] - x[:-1])))
