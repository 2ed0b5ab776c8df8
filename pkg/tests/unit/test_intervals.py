"""
Tests for box arithmetic: volumes, intersection, splitting and θ wrapping.
"""

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from reachsafe_core.domain.errors import BelowThreshold, DimensionMismatch
from reachsafe_core.domain.intervals import (
    TWO_PI, Box, ConfigBox, SimpleInterval, StateBox, intersect, minkowski_sum,
    above_threshold, bisect, normalized_width, split, theta_fragments, volume_scaled, wrap_theta,
)


class TestBox:
    """Construction and basic queries."""

    def test_inverted_interval_rejected(self):
        with pytest.raises(ValueError):
            SimpleInterval(1.0, 0.0)
        with pytest.raises(ValueError):
            Box((0.0, 1.0), (1.0, 0.5))

    def test_mismatched_endpoints_rejected(self):
        with pytest.raises(DimensionMismatch):
            Box((0.0, 1.0), (1.0,))

    def test_point_box_has_zero_width(self):
        b = Box.point([1.0, 2.0, 3.0])
        assert b.widths.tolist() == [0.0, 0.0, 0.0]
        assert b.contains_point([1.0, 2.0, 3.0])

    def test_contains_box(self):
        outer = Box.from_arrays([0, 0], [2, 2])
        assert outer.contains_box(Box.from_arrays([0.5, 0.5], [1, 2]))
        assert not outer.contains_box(Box.from_arrays([0.5, 0.5], [1, 2.1]))

    def test_dict_round_trip(self):
        b = StateBox(ConfigBox.from_bounds([0, 1, 2], [1, 2, 3]), Box.from_arrays([0.1], [0.2]))
        assert StateBox.from_dict(b.to_dict()) == b


class TestVolume:
    """Scaled volume Π δ_i·width_i."""

    def test_scaled_volume(self):
        b = Box.from_arrays([0, 0, 0], [2, 3, math.pi])
        assert volume_scaled(b, [1, 1, 1 / TWO_PI]) == pytest.approx(3.0)

    def test_zero_dimensional_box_has_unit_volume(self):
        assert volume_scaled(Box.empty_dims(), []) == 1.0

    def test_wrong_delta_length(self):
        with pytest.raises(DimensionMismatch):
            volume_scaled(Box.from_arrays([0, 0], [1, 1]), [1.0])


class TestIntersectAndSum:

    def test_overlap(self):
        a = Box.from_arrays([0, 0], [2, 2])
        b = Box.from_arrays([1, -1], [3, 1])
        assert intersect(a, b) == Box.from_arrays([1, 0], [2, 1])

    def test_disjoint_returns_none(self):
        a = Box.from_arrays([0, 0], [1, 1])
        b = Box.from_arrays([2, 0], [3, 1])
        assert intersect(a, b) is None

    def test_touching_faces_give_flat_box(self):
        a = Box.from_arrays([0, 0], [1, 1])
        b = Box.from_arrays([1, 0], [2, 1])
        assert intersect(a, b).widths.tolist() == [0.0, 1.0]

    def test_minkowski_sum(self):
        a = Box.from_arrays([0, 0], [1, 1])
        b = Box.from_arrays([-0.5, 1], [0.5, 2])
        assert minkowski_sum(a, b) == Box.from_arrays([-0.5, 1], [1.5, 3])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            intersect(Box.from_arrays([0], [1]), Box.from_arrays([0, 0], [1, 1]))


class TestSplit:
    """Bisection along the widest normalized dimension."""

    def test_splits_widest_ratio(self):
        b = StateBox(ConfigBox.from_bounds([0, 0, 0], [1, 4, 0.1]))
        left, right = split(b, [1, 1, 1])
        assert left.hi[1] == 2.0 and right.lo[1] == 2.0
        assert left.lo[0] == 0.0 and left.hi[0] == 1.0

    def test_ties_go_to_lowest_index(self):
        b = StateBox(ConfigBox.from_bounds([0, 0, 0], [2, 2, 2]))
        left, right = split(b, [1, 1, 1])
        assert left.hi == (1.0, 2.0, 2.0)
        assert right.lo == (1.0, 0.0, 0.0)

    def test_children_tile_parent(self):
        b = StateBox(ConfigBox.from_bounds([0, 0, 0], [1, 1, 3]), Box.from_arrays([0.0], [5.0]))
        left, right = split(b, [0.5, 0.5, 0.5])
        total = volume_scaled(left.as_box(), [1] * 4) + volume_scaled(right.as_box(), [1] * 4)
        assert total == pytest.approx(volume_scaled(b.as_box(), [1] * 4))
        assert left.misc == b.misc and right.misc == b.misc

    def test_below_threshold(self):
        b = StateBox(ConfigBox.from_bounds([0, 0, 0], [0.5, 0.5, 0.5]))
        with pytest.raises(BelowThreshold):
            split(b, [0.5, 0.5, 0.5])

    def test_normalized_width(self):
        cfg = ConfigBox.from_bounds([0, 0, 0], [1, 3, 1])
        assert normalized_width(cfg, [1, 1, 0.5]) == 3.0

    def test_rounding_does_not_count_as_wider(self):
        """1.3 - 1.2 exceeds 0.1 only by rounding; such a cell is at its minimum width."""
        cfg = ConfigBox.from_bounds([1.2, 0, 0], [1.3, 0.1, 0.1])
        assert normalized_width(cfg, [0.1, 0.1, 0.1]) > 1.0
        assert not above_threshold(cfg, [0.1, 0.1, 0.1])
        with pytest.raises(BelowThreshold):
            split(StateBox(cfg), [0.1, 0.1, 0.1])

    def test_bisect_ignores_threshold(self):
        cfg = ConfigBox.from_bounds([0, 0, 0], [0.5, 0.25, 0.5])
        left, right = bisect(cfg, [0.5, 0.5, 0.5])
        assert left.hi == (0.25, 0.25, 0.5)
        assert right.lo == (0.25, 0.0, 0.0)


class TestThetaWrap:
    """Heading intervals mapped onto [0, 2π]."""

    def test_inside_range_is_unchanged(self):
        assert theta_fragments(0.5, 1.0) == [(0.5, 1.0, True, True)]

    def test_negative_interval_splits_at_seam(self):
        frags = theta_fragments(-0.5, 0.5)
        assert len(frags) == 2
        a, b, lo_tracks, hi_tracks = frags[0]
        assert a == pytest.approx(TWO_PI - 0.5) and b == TWO_PI
        assert lo_tracks and not hi_tracks
        a, b, lo_tracks, hi_tracks = frags[1]
        assert a == 0.0 and b == pytest.approx(0.5)
        assert not lo_tracks and hi_tracks

    def test_shift_by_full_turns(self):
        (a, b, _, _), = theta_fragments(TWO_PI + 0.25, TWO_PI + 0.75)
        assert a == pytest.approx(0.25) and b == pytest.approx(0.75)

    def test_full_turn_collapses(self):
        assert theta_fragments(-1.0, 7.0) == [(0.0, TWO_PI, False, False)]

    def test_wrap_preserves_total_width(self):
        cfg = ConfigBox.from_bounds([0, 0, 6.0], [1, 1, 7.0])
        parts = wrap_theta(cfg)
        assert sum(p.theta.width for p in parts) == pytest.approx(1.0)
        assert all(0.0 <= p.theta.lo <= p.theta.hi <= TWO_PI for p in parts)
