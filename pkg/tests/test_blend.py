import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskdiff.blend import MaskPyramid, blend_features, blend_pixels, build_mask_pyramid
from maskdiff.errors import DimensionError, InputError


def blend_loops(a, b, m):
    """Scalar-loop oracle for the blending formula."""
    out = np.empty_like(a)
    for c in range(a.shape[0]):
        for i in range(a.shape[1]):
            for j in range(a.shape[2]):
                out[c, i, j] = b[c, i, j] if m[i, j] == 1.0 else a[c, i, j]
    return out


class TestBlend:
    def test_full_mask_takes_second(self):
        a = np.zeros((2, 3, 3), dtype=np.float32)
        b = np.arange(18, dtype=np.float32).reshape(2, 3, 3)
        assert np.array_equal(blend_features(a, b, np.ones((3, 3))), b)

    def test_empty_mask_takes_first(self):
        a = np.arange(18, dtype=np.float32).reshape(2, 3, 3)
        b = np.ones((2, 3, 3), dtype=np.float32)
        assert np.array_equal(blend_features(a, b, np.zeros((3, 3))), a)

    def test_hand_value(self):
        a = np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32)
        b = np.array([[[5.0, 6.0], [7.0, 8.0]]], dtype=np.float32)
        m = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
        want = np.array([[[5.0, 2.0], [3.0, 8.0]]], dtype=np.float32)
        assert np.array_equal(blend_features(a, b, m), want)

    def test_checkerboard_against_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4, 4)).astype(np.float32)
        b = rng.standard_normal((3, 4, 4)).astype(np.float32)
        m = np.indices((4, 4)).sum(axis=0) % 2
        m = m.astype(np.float32)
        assert np.array_equal(blend_pixels(a, b, m), blend_loops(a, b, m))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            blend_features(np.zeros((1, 2, 2)), np.zeros((1, 3, 3)), np.zeros((2, 2)))
        with pytest.raises(DimensionError):
            blend_features(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), np.zeros((3, 3)))

    def test_non_binary_mask_rejected(self):
        with pytest.raises(InputError):
            blend_features(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), np.full((2, 2), 0.5))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_idempotent_and_local(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((2, 3, 5)).astype(np.float32)
        b = rng.standard_normal((2, 3, 5)).astype(np.float32)
        m = (rng.random((3, 5)) > 0.5).astype(np.float32)
        once = blend_features(a, b, m)
        twice = blend_features(once, b, m)
        assert np.array_equal(once, twice)
        assert np.array_equal(once[:, m == 0.0], a[:, m == 0.0])
        assert np.array_equal(once[:, m == 1.0], b[:, m == 1.0])


class TestMaskPyramid:
    def test_all_ones_everywhere(self):
        p = build_mask_pyramid(np.ones((8, 8), dtype=np.float32), [(4, 4), (2, 2), (8, 8)])
        for level in p.levels.values():
            assert (level == 1.0).all()

    def test_quadrant_downsample(self):
        m = np.zeros((4, 4), dtype=np.float32)
        m[:2, :2] = 1.0
        p = build_mask_pyramid(m, [(2, 2)])
        assert np.array_equal(p.at(2, 2), np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32))

    def test_base_resolution_identity(self):
        rng = np.random.default_rng(1)
        m = (rng.random((6, 6)) > 0.5).astype(np.float32)
        p = build_mask_pyramid(m, [(6, 6)])
        assert np.array_equal(p.at(6, 6), m)

    def test_levels_binary(self):
        rng = np.random.default_rng(2)
        m = (rng.random((16, 16)) > 0.3).astype(np.float32)
        p = build_mask_pyramid(m, [(8, 8), (4, 4), (32, 32)])
        for level in p.levels.values():
            assert set(np.unique(level)) <= {0.0, 1.0}

    def test_missing_level_raises(self):
        p = build_mask_pyramid(np.ones((4, 4), dtype=np.float32), [(2, 2)])
        with pytest.raises(DimensionError):
            p.at(3, 3)

    def test_non_binary_base_rejected(self):
        with pytest.raises(InputError):
            build_mask_pyramid(np.full((4, 4), 0.5, dtype=np.float32), [(2, 2)])
