import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plateflow import (
    BBox,
    NormBox,
    iou,
    letterbox_plan,
    map_box,
    norm_to_pixels,
    pixels_to_norm,
    unmap_box,
)


def boxes(span: float = 1000.0, min_side: float = 0.0):
    coord = st.floats(0, span, allow_nan=False, allow_infinity=False, width=32)
    return st.tuples(coord, coord, coord, coord).map(
        lambda t: BBox(min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]) + min_side, max(t[1], t[3]) + min_side)
    )


class TestBBox:
    def test_properties(self):
        b = BBox(10, 20, 40, 80)
        assert b.width == 30
        assert b.height == 60
        assert b.area == 1800
        assert b.x_center == 25
        assert b.y_center == 50

    def test_degenerate_corners_allowed(self):
        b = BBox(5, 5, 5, 5)
        assert b.area == 0

    def test_inverted_rejected(self):
        with pytest.raises(ValueError):
            BBox(10, 0, 5, 10)
        with pytest.raises(ValueError):
            BBox(0, 10, 10, 5)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            BBox(0, 0, math.nan, 10)
        with pytest.raises(ValueError):
            BBox(0, 0, math.inf, 10)

    def test_clamped(self):
        assert BBox(-5, -2, 30, 40).clamped(20, 20) == BBox(0, 0, 20, 20)


class TestNormBox:
    def test_valid(self):
        n = NormBox(0.5, 0.5, 0.4, 0.6)
        assert n.w == 0.4

    def test_center_range(self):
        with pytest.raises(ValueError):
            NormBox(1.2, 0.5, 0.1, 0.1)

    def test_zero_size_rejected(self):
        with pytest.raises(ValueError):
            NormBox(0.5, 0.5, 0.0, 0.1)


class TestIou:
    def test_known_third(self):
        # inter 5x10 = 50; union 100 + 100 - 50 = 150
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3)

    def test_identity(self):
        b = BBox(3, 4, 10, 12)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 1, 1), BBox(5, 5, 6, 6)) == 0.0

    def test_edge_touching_is_zero(self):
        assert iou(BBox(0, 0, 5, 5), BBox(5, 0, 10, 5)) == 0.0

    def test_contained(self):
        # inter 4; union 100
        assert iou(BBox(0, 0, 10, 10), BBox(2, 2, 4, 4)) == pytest.approx(0.04)

    def test_degenerate_box(self):
        assert iou(BBox(5, 5, 5, 9), BBox(0, 0, 10, 10)) == 0.0

    @given(boxes(), boxes())
    def test_symmetry_and_range(self, a, b):
        ab = iou(a, b)
        assert ab == iou(b, a)
        assert 0.0 <= ab <= 1.0

    @given(boxes(min_side=0.5))
    def test_self_overlap_is_one(self, b):
        assert iou(b, b) == 1.0

    @given(boxes(min_side=0.5), boxes(min_side=0.5), st.floats(-100, 100, allow_nan=False))
    def test_translation_invariance(self, a, b, shift):
        moved_a = BBox(a.x1 + shift, a.y1 + shift, a.x2 + shift, a.y2 + shift)
        moved_b = BBox(b.x1 + shift, b.y1 + shift, b.x2 + shift, b.y2 + shift)
        assert iou(moved_a, moved_b) == pytest.approx(iou(a, b), abs=1e-9)


class TestLetterbox:
    @pytest.mark.parametrize(
        "src,expect",
        [
            ((1280, 720), (0.5, 0.0, 140.0)),
            ((800, 600), (0.8, 0.0, 80.0)),
            ((600, 800), (0.8, 80.0, 0.0)),
            ((640, 640), (1.0, 0.0, 0.0)),
            ((320, 240), (2.0, 0.0, 80.0)),
        ],
    )
    def test_plan_known_values(self, src, expect):
        t = letterbox_plan(src[0], src[1], 640)
        assert (t.scale, t.pad_x, t.pad_y) == expect
        assert (t.src_w, t.src_h, t.dst_w, t.dst_h) == (src[0], src[1], 640, 640)

    def test_plan_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            letterbox_plan(0, 100, 640)
        with pytest.raises(ValueError):
            letterbox_plan(100, -1, 640)

    def test_map_known_values(self):
        t = letterbox_plan(1280, 720, 640)
        assert map_box(BBox(100, 100, 300, 260), t) == BBox(50, 190, 150, 270)

    def test_unmap_clamps_to_source(self):
        t = letterbox_plan(1280, 720, 640)
        # A model box reaching into the top padding clamps to y=0.
        back = unmap_box(BBox(0, 100, 64, 200), t)
        assert back == BBox(0, 0, 128, 120)

    @given(
        st.integers(16, 4000),
        st.integers(16, 4000),
        st.integers(64, 1280),
        st.data(),
    )
    @settings(max_examples=200)
    def test_round_trip(self, src_w, src_h, dst, data):
        t = letterbox_plan(src_w, src_h, dst)
        x1 = data.draw(st.floats(0, src_w - 1, allow_nan=False))
        y1 = data.draw(st.floats(0, src_h - 1, allow_nan=False))
        x2 = data.draw(st.floats(x1, src_w, allow_nan=False))
        y2 = data.draw(st.floats(y1, src_h, allow_nan=False))
        box = BBox(x1, y1, x2, y2)
        back = unmap_box(map_box(box, t), t)
        for got, want in zip((back.x1, back.y1, back.x2, back.y2), (x1, y1, x2, y2)):
            assert abs(got - want) < 1e-6


class TestNormPixel:
    def test_known_expansion(self):
        assert norm_to_pixels(NormBox(0.5, 0.5, 0.4, 0.6), 200, 100) == BBox(60, 20, 140, 80)

    def test_clamps_at_border(self):
        b = norm_to_pixels(NormBox(0.05, 0.5, 0.2, 0.4), 100, 100)
        assert b.x1 == 0.0

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            norm_to_pixels(NormBox(0.5, 0.5, 0.5, 0.5), 0, 10)

    @given(
        st.floats(0.05, 0.95), st.floats(0.05, 0.95),
        st.floats(0.01, 0.1), st.floats(0.01, 0.1),
        st.integers(10, 2000), st.integers(10, 2000),
    )
    def test_round_trip(self, cx, cy, w, h, img_w, img_h):
        n = NormBox(cx, cy, w, h)
        back = pixels_to_norm(norm_to_pixels(n, img_w, img_h), img_w, img_h)
        assert abs(back.cx - n.cx) < 1e-9
        assert abs(back.cy - n.cy) < 1e-9
        assert abs(back.w - n.w) < 1e-9
        assert abs(back.h - n.h) < 1e-9
