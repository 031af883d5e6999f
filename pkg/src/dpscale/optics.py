"""Thin-lens defocus model and unit conversions shared by the whole pipeline.

Sign convention: blur sizes are signed circle-of-confusion *diameters* in
meters, positive when the scene point lies beyond the focal plane.  Pixel
conversion (half the diameter over the sensor pitch) is a separate explicit
step so that blur and aperture diameter can be added in shared physical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CameraMeta:
    """Physical optics of one viewpoint.

    focal_length and sensor_pitch are in meters (pitch per pixel); f_number is
    dimensionless.  The aperture diameter is always recomputed as
    focal_length / f_number rather than stored.
    """

    focal_length: float
    f_number: float
    sensor_pitch: float
    image_width: int = 0
    image_height: int = 0

    def __post_init__(self):
        if not (self.focal_length > 0 and math.isfinite(self.focal_length)):
            raise ValueError(f"focal_length must be positive, got {self.focal_length}")
        if not (self.f_number > 0 and math.isfinite(self.f_number)):
            raise ValueError(f"f_number must be positive, got {self.f_number}")
        if not (self.sensor_pitch > 0 and math.isfinite(self.sensor_pitch)):
            raise ValueError(f"sensor_pitch must be positive, got {self.sensor_pitch}")

    @property
    def aperture_diameter(self) -> float:
        return aperture_diameter(self.focal_length, self.f_number)


def aperture_diameter(focal_length: float, f_number: float) -> float:
    """Lens aperture diameter in meters from focal length and f-number."""
    if focal_length <= 0 or f_number <= 0:
        raise ValueError(
            f"focal_length and f_number must be positive, got {focal_length}, {f_number}"
        )
    return focal_length / f_number


def thin_lens_blur(z: float, g: float, f: float, l: float) -> float:
    """Signed defocus blur diameter (meters) of a point at depth z.

    g is the in-focus distance, f the focal length, l the aperture diameter,
    all in meters.  Positive for z > g, zero at z == g, negative for z < g.
    """
    if z <= 0:
        raise ValueError(f"depth must be positive, got {z}")
    if l <= 0:
        raise ValueError(f"aperture diameter must be positive, got {l}")
    if g <= f or f <= 0:
        raise ValueError(f"need focus distance g > focal length f > 0, got g={g}, f={f}")
    return (l * f / (1.0 - f / g)) * (1.0 / g - 1.0 / z)


def depth_for_blur(b: float, g: float, f: float, l: float) -> float:
    """Invert thin_lens_blur: the depth producing blur diameter b.

    Useful for constructing synthetic scenes with prescribed blur sizes.
    """
    if l <= 0:
        raise ValueError(f"aperture diameter must be positive, got {l}")
    if g <= f or f <= 0:
        raise ValueError(f"need focus distance g > focal length f > 0, got g={g}, f={f}")
    inv_z = 1.0 / g - b * (1.0 - f / g) / (l * f)
    if inv_z <= 0:
        raise ValueError(f"blur {b} corresponds to a point at or beyond infinity")
    return 1.0 / inv_z


def blur_to_pixel_radius(b: float, pitch: float) -> float:
    """Signed blur radius in pixels: half the diameter over the sensor pitch."""
    if pitch <= 0:
        raise ValueError(f"sensor pitch must be positive, got {pitch}")
    return b / (2.0 * pitch)


def pixel_radius_to_blur(r: float, pitch: float) -> float:
    """Inverse of blur_to_pixel_radius: signed diameter in meters."""
    if pitch <= 0:
        raise ValueError(f"sensor pitch must be positive, got {pitch}")
    return 2.0 * pitch * r
