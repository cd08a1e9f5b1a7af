"""Tests for the initial island shape builders."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dewet2d.convergence import point_polyline_distances
from dewet2d.geometry import Curve, enclosed_area, mesh_ratio
from dewet2d.shapes import (
    rectangle_curve,
    trapezoid_curve,
    tube_curve,
    tube_perimeter,
)

CAPSULE_AREA = 4.0 + math.pi / 4.0  # 4x1 rectangle plus a full r=1/2 disk


class TestTubeCurve:
    def test_perimeter_value(self):
        assert tube_perimeter() == pytest.approx(8.0 + math.pi, rel=1e-15)
        assert tube_perimeter(6.0, 2.0) == pytest.approx(12.0 + 2.0 * math.pi, rel=1e-15)

    def test_node_count_and_closure(self):
        c = tube_curve(120)
        assert c.closed
        assert c.n_nodes == 120

    def test_starts_on_top_edge_heading_right(self):
        c = tube_curve(120)
        assert c.nodes[0, 0] == -2.0
        assert c.nodes[0, 1] == 0.5
        assert c.nodes[1, 0] > c.nodes[0, 0]
        assert c.nodes[1, 1] == 0.5

    def test_clockwise_orientation_gives_positive_area(self):
        assert enclosed_area(tube_curve(64)) > 0

    def test_area_matches_capsule_to_second_order(self):
        e120 = abs(enclosed_area(tube_curve(120)) - CAPSULE_AREA)
        e240 = abs(enclosed_area(tube_curve(240)) - CAPSULE_AREA)
        assert e120 <= 5e-3
        assert 3.8 <= e120 / e240 <= 4.2

    def test_equal_arc_spacing_chord_ratio(self):
        # chords inside the caps subtend h of arc, so the worst chord is
        # 2 r sin(h / 2r) against exactly h on the straight edges
        h = tube_perimeter() / 120
        expected = h / (2.0 * 0.5 * math.sin(h / (2.0 * 0.5)))
        assert mesh_ratio(tube_curve(120)) == pytest.approx(expected, rel=1e-12)

    @given(st.integers(8, 400))
    @settings(max_examples=25, deadline=None)
    def test_nodes_lie_on_the_ideal_boundary(self, n):
        c = tube_curve(n)
        x, y = c.nodes[:, 0], c.nodes[:, 1]
        on_edge = (np.abs(np.abs(y) - 0.5) <= 1e-12) & (np.abs(x) <= 2.0 + 1e-12)
        on_right = np.abs(np.hypot(x - 2.0, y) - 0.5) <= 1e-12
        on_left = np.abs(np.hypot(x + 2.0, y) - 0.5) <= 1e-12
        assert np.all(on_edge | on_right | on_left)

    def test_custom_dimensions_bounding_box(self):
        c = tube_curve(256, length=6.0, height=2.0)
        x, y = c.nodes[:, 0], c.nodes[:, 1]
        h = tube_perimeter(6.0, 2.0) / 256
        assert np.abs(y).max() <= 1.0 + 1e-12
        assert np.abs(y).max() >= 1.0 - h
        assert np.abs(x).max() <= 4.0 + 1e-12
        assert np.abs(x).max() >= 4.0 - h

    def test_minimum_segments_enforced(self):
        with pytest.raises(ValueError, match="at least 8"):
            tube_curve(7)


class TestRectangleCurve:
    def test_endpoints_exact_on_substrate(self):
        c = rectangle_curve(140)
        assert c.nodes[0, 0] == -2.5 and c.nodes[0, 1] == 0.0
        assert c.nodes[-1, 0] == 2.5 and c.nodes[-1, 1] == 0.0
        assert not c.closed

    def test_corners_are_nodes_when_spacing_divides(self):
        c = rectangle_curve(140)  # h = 0.05 divides the side length 1
        np.testing.assert_allclose(c.nodes[20], [-2.5, 1.0], atol=1e-12)
        np.testing.assert_allclose(c.nodes[120], [2.5, 1.0], atol=1e-12)

    def test_area_exact_when_corners_on_nodes(self):
        assert enclosed_area(rectangle_curve(140)) == pytest.approx(5.0, rel=1e-12)
        assert enclosed_area(rectangle_curve(70)) == pytest.approx(5.0, rel=1e-12)

    def test_area_deficit_bounded_when_corners_are_cut(self):
        n = 97
        h = 7.0 / n
        area = enclosed_area(rectangle_curve(n))
        assert area <= 5.0 + 1e-12
        assert 5.0 - area <= h * h

    def test_uniform_chords_when_spacing_divides(self):
        assert mesh_ratio(rectangle_curve(140)) == pytest.approx(1.0, abs=1e-10)

    @given(st.integers(4, 300))
    @settings(max_examples=25, deadline=None)
    def test_nodes_lie_on_the_ideal_outline(self, n):
        c = rectangle_curve(n)
        outline = Curve(
            np.array([[-2.5, 0.0], [-2.5, 1.0], [2.5, 1.0], [2.5, 0.0]]),
            closed=False,
        )
        assert point_polyline_distances(c.nodes, outline).max() <= 1e-12

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 4"):
            rectangle_curve(3)
        with pytest.raises(ValueError, match="positive"):
            rectangle_curve(40, width=-1.0)
        with pytest.raises(ValueError, match="positive"):
            rectangle_curve(40, height=0.0)


class TestTrapezoidCurve:
    def test_endpoints_and_area(self):
        c = trapezoid_curve(400, top=2.0, bottom=4.0)
        assert c.nodes[0, 0] == -2.0 and c.nodes[0, 1] == 0.0
        assert c.nodes[-1, 0] == 2.0 and c.nodes[-1, 1] == 0.0
        assert enclosed_area(c) == pytest.approx(3.0, abs=1e-3)

    def test_long_island_geometries_have_area_sixty(self):
        wide_top = trapezoid_curve(600, top=65.0, bottom=55.0)
        wide_base = trapezoid_curve(600, top=55.0, bottom=65.0)
        assert enclosed_area(wide_top) == pytest.approx(60.0, abs=0.05)
        assert enclosed_area(wide_base) == pytest.approx(60.0, abs=0.05)
        assert wide_base.nodes[0, 0] == -32.5
        assert wide_top.nodes[0, 0] == -27.5

    def test_mirror_symmetry(self):
        c = trapezoid_curve(256, top=3.0, bottom=5.0)
        np.testing.assert_allclose(c.nodes[:, 0], -c.nodes[::-1, 0], atol=1e-12)
        np.testing.assert_allclose(c.nodes[:, 1], c.nodes[::-1, 1], atol=1e-12)

    @given(st.integers(4, 300))
    @settings(max_examples=25, deadline=None)
    def test_nodes_lie_on_the_ideal_outline(self, n):
        c = trapezoid_curve(n, top=2.0, bottom=6.0, height=1.5)
        outline = Curve(
            np.array([[-3.0, 0.0], [-1.0, 1.5], [1.0, 1.5], [3.0, 0.0]]),
            closed=False,
        )
        assert point_polyline_distances(c.nodes, outline).max() <= 1e-12

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 4"):
            trapezoid_curve(3, top=1.0, bottom=2.0)
        for bad in (
            dict(top=0.0, bottom=2.0),
            dict(top=1.0, bottom=-2.0),
            dict(top=1.0, bottom=2.0, height=0.0),
        ):
            with pytest.raises(ValueError, match="positive"):
                trapezoid_curve(64, **bad)
