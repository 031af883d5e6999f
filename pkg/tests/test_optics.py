import math

import numpy as np
import pytest

from dpscale.optics import (
    CameraMeta,
    aperture_diameter,
    blur_to_pixel_radius,
    depth_for_blur,
    pixel_radius_to_blur,
    thin_lens_blur,
)


class TestApertureDiameter:
    def test_direct_division(self):
        assert aperture_diameter(0.05, 1.8) == pytest.approx(0.027778, abs=1e-6)

    def test_phone_lens(self):
        # 4.38 mm focal length at f/1.73
        assert aperture_diameter(0.00438, 1.73) == pytest.approx(0.0025318, abs=1e-7)

    def test_identity_f_number(self):
        assert aperture_diameter(0.085, 1.0) == 0.085

    @pytest.mark.parametrize("f,n", [(0.0, 2.0), (-0.05, 2.0), (0.05, 0.0), (0.05, -1.0)])
    def test_non_positive_inputs(self, f, n):
        with pytest.raises(ValueError):
            aperture_diameter(f, n)


class TestThinLensBlur:
    F, L, G = 0.05, 0.027778, 2.0

    def test_in_focus_is_zero(self):
        assert thin_lens_blur(2.0, self.G, self.F, self.L) == 0.0

    def test_beyond_focus_positive(self):
        # (l*f / (1 - f/g)) * (1/g - 1/z) with z=4: 0.0013889/0.975 * 0.25
        b = thin_lens_blur(4.0, self.G, self.F, self.L)
        assert b == pytest.approx(3.5613e-4, rel=1e-4)
        assert b > 0

    def test_before_focus_negative(self):
        b = thin_lens_blur(1.5, self.G, self.F, self.L)
        assert b == pytest.approx(-2.3742e-4, rel=1e-4)
        assert b < 0

    def test_focal_plane_behind_lens_rejected(self):
        with pytest.raises(ValueError):
            thin_lens_blur(2.0, 0.04, self.F, self.L)

    def test_non_positive_depth_rejected(self):
        with pytest.raises(ValueError):
            thin_lens_blur(0.0, self.G, self.F, self.L)

    def test_monotone_in_inverse_depth(self):
        zs = np.linspace(0.5, 10.0, 50)
        bs = [thin_lens_blur(z, self.G, self.F, self.L) for z in zs]
        # b increases with 1/g - 1/z, i.e. with z
        assert all(b2 > b1 for b1, b2 in zip(bs, bs[1:]))

    def test_depth_round_trip(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            f = rng.uniform(0.004, 0.1)
            g = rng.uniform(f * 3, 5.0)
            l = f / rng.uniform(1.2, 16.0)
            z = rng.uniform(f * 2, 10.0)
            b = thin_lens_blur(z, g, f, l)
            assert depth_for_blur(b, g, f, l) == pytest.approx(z, rel=1e-9)


class TestPixelConversion:
    def test_zero_blur(self):
        assert blur_to_pixel_radius(0.0, 5.36e-6) == 0.0

    def test_positive(self):
        assert blur_to_pixel_radius(3.5613e-4, 5.36e-6) == pytest.approx(33.22, abs=0.01)

    def test_negative(self):
        assert blur_to_pixel_radius(-2.3742e-4, 5.36e-6) == pytest.approx(-22.15, abs=0.01)

    def test_inverse(self):
        assert pixel_radius_to_blur(33.22, 5.36e-6) == pytest.approx(3.5612e-4, rel=1e-4)

    def test_bad_pitch(self):
        with pytest.raises(ValueError):
            blur_to_pixel_radius(1e-4, 0.0)


class TestCameraMeta:
    def test_aperture_recomputed(self):
        meta = CameraMeta(focal_length=0.05, f_number=1.8, sensor_pitch=5.36e-6)
        assert math.isclose(meta.aperture_diameter, 0.05 / 1.8, rel_tol=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(focal_length=0.0, f_number=2.0, sensor_pitch=1e-6),
            dict(focal_length=0.05, f_number=-2.0, sensor_pitch=1e-6),
            dict(focal_length=0.05, f_number=2.0, sensor_pitch=0.0),
            dict(focal_length=float("nan"), f_number=2.0, sensor_pitch=1e-6),
        ],
    )
    def test_invalid_meta_rejected(self, kwargs):
        with pytest.raises(ValueError):
            CameraMeta(**kwargs)
