import numpy as np
import pytest

from dpscale.errors import DegeneratePatchError
from dpscale.psf import (
    PairConvolver,
    convolve,
    disk,
    embed_kernel,
    flip_h,
    normalize_l1,
    right_psf,
)


def brute_disk_count(r):
    """Independent enumeration of lattice cells with x^2 + y^2 <= r^2."""
    n = int(abs(r)) + 1
    return sum(
        1
        for x in range(-n, n + 1)
        for y in range(-n, n + 1)
        if x * x + y * y <= r * r
    )


class TestDisk:
    def test_delta(self):
        assert np.array_equal(disk(0, 0, 0, 1), [[1.0]])

    def test_radius_one_plus_sign(self):
        mask = disk(0, 0, 1, 3)
        assert mask.sum() == 5 == brute_disk_count(1)
        assert np.array_equal(mask, [[0, 1, 0], [1, 1, 1], [0, 1, 0]])

    def test_radius_two_count(self):
        assert disk(0, 0, 2, 5).sum() == 13 == brute_disk_count(2)

    def test_sign_agnostic(self):
        assert np.array_equal(disk(0, 0, -2, 5), disk(0, 0, 2, 5))

    def test_offset_center(self):
        mask = disk(1, 0, 1, 5)
        # same plus sign, shifted one column right
        assert mask.sum() == 5
        assert mask[2, 3] == 1 and mask[2, 1] == 1

    def test_too_small_grid(self):
        with pytest.raises(ValueError):
            disk(0, 0, 2, 3)
        with pytest.raises(ValueError):
            disk(3, 0, 1, 5)

    def test_even_side_rejected(self):
        with pytest.raises(ValueError):
            disk(0, 0, 1, 4)


class TestRightPsf:
    def test_zero_radius_is_delta(self):
        k = right_psf(0.0)
        assert k.side == 1
        assert np.array_equal(k.grid, [[1.0]])

    def test_sub_unit_radius_is_delta(self):
        for r in (0.2, 0.49, -0.4):
            assert right_psf(r).side == 1

    def test_positive_radius_centroid_offset(self):
        k = right_psf(2.0)
        xs = np.arange(k.side) - k.side // 2
        centroid_x = float((k.grid * xs[np.newaxis, :]).sum())
        assert centroid_x > 0

    def test_unit_sum(self):
        for r in (0.4, -0.4, 1.0, -1.0, 2.5, -2.5, 8.0, -8.0, 3.7):
            assert abs(right_psf(r).grid.sum() - 1.0) <= 1e-12

    def test_mirror_symmetry_exact(self):
        for r in (0.4, 1.0, 2.5, 8.0):
            flipped = flip_h(right_psf(r))
            other = right_psf(-r)
            assert np.array_equal(flipped.grid, other.grid)
            assert flipped.radius_px == other.radius_px

    def test_support_inside_centered_disk(self):
        for r in (2.5, 5.0, 8.0):
            k = right_psf(r)
            half = k.side // 2
            ys, xs = np.nonzero(k.grid)
            dist2 = (ys - half) ** 2 + (xs - half) ** 2
            assert dist2.max() <= r * r

    def test_nonnegative(self):
        assert (right_psf(6.3).grid >= 0).all()


class TestFlip:
    def test_delta_fixed_point(self):
        assert np.array_equal(flip_h(right_psf(0.0)).grid, [[1.0]])

    def test_involution(self):
        k = right_psf(3.5)
        assert np.array_equal(flip_h(flip_h(k)).grid, k.grid)
        assert flip_h(flip_h(k)).radius_px == k.radius_px


class TestConvolve:
    def test_delta_identity(self):
        rng = np.random.default_rng(0)
        p = rng.random((16, 16))
        assert np.array_equal(convolve(p, right_psf(0.0)), p)

    def test_constant_conservation(self):
        p = np.full((20, 20), 3.25)
        out = convolve(p, right_psf(2.0))
        np.testing.assert_allclose(out, 3.25, rtol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(1)
        p1, p2 = rng.random((20, 20)), rng.random((20, 20))
        k = right_psf(2.5)
        lhs = convolve(2.0 * p1 + p2, k)
        rhs = 2.0 * convolve(p1, k) + convolve(p2, k)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_valid_crop_shape(self):
        p = np.zeros((20, 30))
        k = right_psf(2.0)  # side 5
        assert convolve(p, k).shape == (16, 26)

    def test_kernel_too_large(self):
        with pytest.raises(ValueError):
            convolve(np.zeros((4, 4)), right_psf(3.0))


class TestNormalizeL1:
    def test_uniform(self):
        out = normalize_l1(np.full((2, 2), 2.0))
        np.testing.assert_allclose(out, 0.125)

    def test_unit_norm(self):
        rng = np.random.default_rng(2)
        p = rng.random((9, 9))
        assert abs(np.abs(normalize_l1(p)).sum() - 1.0) <= 1e-12

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        p = rng.random((7, 7))
        np.testing.assert_allclose(normalize_l1(5.5 * p), normalize_l1(p), rtol=1e-12)

    def test_zero_patch_rejected(self):
        with pytest.raises(DegeneratePatchError):
            normalize_l1(np.zeros((4, 4)))


class TestPairConvolver:
    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(4)
        gl, gr = rng.random((32, 32)), rng.random((32, 32))
        k = right_psf(2.5)
        side = 11
        conv = PairConvolver(gl, gr, side)
        left, right = conv.convolve_pair(k)
        ref_l = convolve(gl, type(k)(k.radius_px, embed_kernel(k, side)))
        ref_r = convolve(gr, type(k)(-k.radius_px, embed_kernel(flip_h(k), side)))
        np.testing.assert_allclose(left, ref_l, atol=1e-12)
        np.testing.assert_allclose(right, ref_r, atol=1e-12)

    def test_cross_diff_norm_consistent(self):
        rng = np.random.default_rng(5)
        gl, gr = rng.random((32, 32)), rng.random((32, 32))
        conv = PairConvolver(gl, gr, 11)
        k = right_psf(3.0)
        left, right = conv.convolve_pair(k)
        assert conv.cross_diff_norm(k) == pytest.approx(
            float(np.linalg.norm(left - right)), rel=1e-10
        )

    def test_embed_rejects_small_target(self):
        with pytest.raises(ValueError):
            embed_kernel(right_psf(4.0), 5)
