"""Unit and property tests for the polyline geometry layer."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dewet2d.geometry import (
    Curve,
    DegenerateGeometryError,
    enclosed_area,
    frames,
    mesh_ratio,
    redistribute,
    resample,
)

from conftest import open_rectangle, project_onto_polyline, regular_polygon


def unit_square() -> Curve:
    # clockwise in y-up axes = material on the right of the traversal
    return Curve(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]), closed=True)


# ---------------------------------------------------------------- construction


class TestCurveValidation:
    def test_open_endpoints_must_sit_on_substrate(self):
        with pytest.raises(ValueError, match="y = 0"):
            Curve(np.array([[0.0, 0.1], [1.0, 1.0], [2.0, 0.0]]))

    def test_open_endpoints_must_be_ordered_left_to_right(self):
        with pytest.raises(ValueError, match="smaller to larger"):
            Curve(np.array([[2.0, 0.0], [1.0, 1.0], [0.0, 0.0]]))

    def test_coincident_consecutive_nodes_rejected(self):
        with pytest.raises(ValueError, match="coincide"):
            Curve(np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [2.0, 0.0]]))

    def test_closed_wrap_segment_checked_for_coincidence(self):
        with pytest.raises(ValueError, match="coincide"):
            Curve(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [0.0, 0.0]]), closed=True)

    def test_too_few_segments(self):
        with pytest.raises(ValueError, match="too few"):
            Curve(np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ValueError, match="too few"):
            Curve(np.array([[0.0, 0.0], [1.0, 1.0]]), closed=True)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            Curve(np.array([[0.0, 0.0], [1.0, np.nan], [2.0, 0.0]]))

    def test_nodes_are_frozen(self):
        c = unit_square()
        with pytest.raises(ValueError):
            c.nodes[0, 0] = 5.0


# --------------------------------------------------------------------- frames


class TestFrames:
    def test_unit_square(self):
        f = frames(unit_square())
        assert f.total_length == pytest.approx(4.0, abs=1e-14)
        np.testing.assert_allclose(f.length, 1.0)
        # normals point away from the interior
        mids = 0.5 * (unit_square().nodes + np.roll(unit_square().nodes, -1, axis=0))
        outward = np.einsum("ij,ij->i", f.normal, mids - [0.5, 0.5])
        assert (outward > 0.4).all()
        np.testing.assert_allclose(f.theta, [np.pi / 2, 0.0, -np.pi / 2, np.pi])

    def test_horizontal_segment(self):
        c = Curve(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]]))
        f = frames(c)
        np.testing.assert_allclose(f.tangent[0], [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(f.normal[0], [0.0, 1.0], atol=1e-15)
        assert f.theta[0] == 0.0

    def test_regular_polygon_perimeter(self):
        m = 64
        f = frames(regular_polygon(m))
        exact = 2 * m * math.sin(math.pi / m)
        assert f.total_length == pytest.approx(exact, rel=1e-13)
        assert abs(f.total_length - 2 * math.pi) / (2 * math.pi) < 0.01

    def test_unit_tangent_and_normal(self):
        f = frames(regular_polygon(17, radius=3.0, center=(2.0, -1.0)))
        np.testing.assert_allclose(np.hypot(*f.tangent.T), 1.0, atol=1e-14)
        np.testing.assert_allclose(np.hypot(*f.normal.T), 1.0, atol=1e-14)
        np.testing.assert_allclose(np.einsum("ij,ij->i", f.tangent, f.normal), 0.0, atol=1e-15)

    def test_degenerate_segment_names_index(self):
        # distinct floats, but the segment is ~1e-14 of the total length
        nodes = np.array([[0.0, 0.0], [1.0, 1.0], [1.0 + 1e-14, 1.0], [2.0, 0.0]])
        with pytest.raises(DegenerateGeometryError, match="segment 1"):
            frames(Curve(nodes))

    def test_tangents_rebuild_the_polyline(self, rng):
        c = regular_polygon(23, radius=1.7, phase=0.3)
        f = frames(c)
        steps = f.tangent * f.length[:, None]
        rebuilt = c.nodes[0] + np.cumsum(steps[:-1], axis=0)
        np.testing.assert_allclose(rebuilt, c.nodes[1:], atol=1e-13)


# ----------------------------------------------------------------- mesh ratio


class TestMeshRatio:
    def test_uniform(self):
        assert mesh_ratio(regular_polygon(40)) == pytest.approx(1.0, abs=1e-12)

    def test_lengths_1_2_4(self):
        c = Curve(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0]]))
        assert mesh_ratio(c) == pytest.approx(4.0, abs=1e-14)


# ------------------------------------------------------------- redistribution


class TestRedistribute:
    def test_uniform_curve_is_fixed_point(self):
        c = regular_polygon(32, radius=2.0)
        np.testing.assert_allclose(redistribute(c).nodes, c.nodes, atol=1e-12)

    def test_three_node_hand_computation(self):
        c = Curve(np.array([[0.0, 0.0], [0.1, 0.9], [2.0, 0.0]]))
        r = redistribute(c)
        # the middle node must land at half the total arc length, which
        # falls on the second segment
        l1 = math.hypot(0.1, 0.9)
        l2 = math.hypot(1.9, -0.9)
        excess = 0.5 * (l1 + l2) - l1
        expected = np.array([0.1, 0.9]) + excess / l2 * np.array([1.9, -0.9])
        np.testing.assert_allclose(r.nodes[1], expected, atol=1e-14)
        np.testing.assert_allclose(r.nodes[[0, 2]], c.nodes[[0, 2]], atol=0.0)

    def test_open_endpoints_kept_exactly(self):
        c = open_rectangle(5.0, 1.0, 37)
        r = redistribute(c)
        assert r.nodes[0, 0] == c.nodes[0, 0] and r.nodes[0, 1] == 0.0
        assert r.nodes[-1, 0] == c.nodes[-1, 0] and r.nodes[-1, 1] == 0.0

    def test_closed_anchor_node_kept(self):
        c = Curve(np.array([[2.0, 0.0], [0.0, -2.0], [-1.0, 0.0], [0.0, 1.0]]), closed=True)
        r = resample(c, 50)
        np.testing.assert_allclose(r.nodes[0], c.nodes[0], atol=1e-15)

    @given(st.integers(5, 60), st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_nodes_equally_spaced_along_old_support(self, n, seed):
        # the defining property: new nodes sit on the input polyline at
        # arc parameters j L / n of the input
        rng = np.random.default_rng(seed)
        r = 1.0 + 0.3 * rng.standard_normal(n)
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))[::-1]
        c = Curve(np.column_stack([r * np.cos(ang), r * np.sin(ang)]), closed=True)
        out = redistribute(c)
        params, dist = project_onto_polyline(out.nodes, c)
        total = frames(c).total_length
        assert dist.max() <= 1e-10 * total
        np.testing.assert_allclose(
            params, total * np.arange(n) / n, atol=1e-10 * total
        )

    def test_uniform_chords_are_a_fixed_point(self):
        c = regular_polygon(48, radius=1.3, phase=0.7)
        np.testing.assert_allclose(redistribute(c).nodes, c.nodes, atol=1e-13)

    def test_mesh_ratio_near_one_on_smooth_curves(self):
        # corner-straddling chords are shorter by O(turn angle squared), so
        # on a fine smooth curve the ratio is 1 up to that quadratic deficit
        ang = np.linspace(0, 2 * np.pi, 257)[:-1][::-1]
        r = 1.0 + 0.05 * np.sin(3 * ang)
        c = Curve(np.column_stack([r * np.cos(ang), r * np.sin(ang)]), closed=True)
        assert mesh_ratio(redistribute(c)) <= 1 + 2e-4

    def test_resample_changes_count(self):
        c = open_rectangle(5.0, 1.0, 20)
        r = resample(c, 55)
        assert r.n_segments == 55
        assert frames(r).total_length == pytest.approx(frames(c).total_length, rel=1e-2)

    def test_length_loss_shrinks_under_refinement(self):
        dense = open_rectangle(5.0, 1.0, 2000)
        ref = frames(dense).total_length
        errs = [abs(frames(resample(dense, n)).total_length - ref) for n in (40, 80, 160)]
        assert errs[0] > errs[1] > errs[2]


# ----------------------------------------------------------------------- area


class TestEnclosedArea:
    def test_open_rectangle(self):
        assert enclosed_area(open_rectangle(5.0, 1.0, 140)) == pytest.approx(5.0, abs=1e-12)

    def test_mirror_symmetry(self):
        c = open_rectangle(4.0, 1.5, 33)
        mirrored = Curve(np.column_stack([-c.nodes[::-1, 0], c.nodes[::-1, 1]]))
        assert enclosed_area(mirrored) == pytest.approx(enclosed_area(c), rel=1e-13)

    def test_polygonal_circle(self):
        m = 256
        a = enclosed_area(regular_polygon(m))
        assert a == pytest.approx(0.5 * m * math.sin(2 * math.pi / m), rel=1e-13)
        assert abs(a - math.pi) < 1e-3

    @given(st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=25, deadline=None)
    def test_translation_invariance(self, dx, dy):
        c = regular_polygon(12, radius=1.3)
        shifted = Curve(c.nodes + [dx, dy], closed=True)
        assert enclosed_area(shifted) == pytest.approx(enclosed_area(c), rel=1e-10, abs=1e-10)

    def test_positive_for_material_on_right(self):
        assert enclosed_area(unit_square()) == pytest.approx(1.0, abs=1e-14)
        assert enclosed_area(regular_polygon(6)) > 0
