"""Forward-model renderer: DP view pairs from known absolute geometry.

Scenes are piecewise fronto-parallel: each view is a set of non-overlapping
image regions, each at one absolute depth, imaged through the thin-lens model
with a known focus distance.  The right sub-aperture image is the texture
convolved with the signed-radius DP kernel, the left with its mirror; the
emitted depth maps are exactly the absolute depths divided by the ground
truth scale, so every downstream stage can be checked against a closed loop.

Textures are seeded band-limited noise: self-contained, controllable
spectrum, and enough gradient energy at every patch for the blur search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from .optics import (
    CameraMeta,
    blur_to_pixel_radius,
    depth_for_blur,
    pixel_radius_to_blur,
    thin_lens_blur,
)
from .psf import convolve, flip_h, right_psf
from .views import DpView


@dataclass(frozen=True)
class PlaneSpec:
    """One fronto-parallel textured plane covering an image region."""

    z: float  # absolute depth, meters
    y0: int
    y1: int
    x0: int
    x1: int


@dataclass
class ViewSpec:
    focus_distance: float  # absolute, meters
    meta: CameraMeta
    planes: list[PlaneSpec]
    aperture_group: str = ""


@dataclass
class SceneSpec:
    scale: float  # ground-truth s: absolute = scale * reconstruction units
    height: int
    width: int
    views: list[ViewSpec]
    noise_sigma: float = 0.0
    gain_jitter: float = 0.0
    seed: int = 0
    channels: int = 3


@dataclass
class PlaneTruth:
    z: float
    z_prime: float
    b: float
    radius_px: float


@dataclass
class GroundTruth:
    scale: float
    focus_distances: dict[int, float]
    planes: dict[int, list[PlaneTruth]] = field(default_factory=dict)


@dataclass
class SyntheticDataset:
    views: list[DpView]
    truth: GroundTruth


def band_limited_texture(height, width, rng, smoothing=1.5, lo=0.25, hi=0.75,
                         channels=1) -> np.ndarray:
    """Seeded noise low-passed to the given smoothing scale, mapped to [lo, hi]."""
    shape = (height, width) if channels == 1 else (height, width, channels)
    noise = rng.standard_normal(shape)
    if channels == 1:
        smooth = scipy.ndimage.gaussian_filter(noise, smoothing)
    else:
        smooth = np.stack(
            [scipy.ndimage.gaussian_filter(noise[..., c], smoothing)
             for c in range(channels)],
            axis=-1,
        )
    span = np.ptp(smooth)
    if span == 0:
        raise ValueError("texture collapsed to a constant")
    return lo + (hi - lo) * (smooth - smooth.min()) / span


def render_dp_patch_at_radius(texture, r: float, rng=None,
                              noise_sigma=0.0, gain_jitter=0.0):
    """(left, right) DP pair of a sharp texture at an exact signed pixel radius.

    The right view is the texture convolved with the right PSF, the left with
    its mirror, both cropped to the shared valid interior.
    """
    kern_r = right_psf(r)
    kern_l = flip_h(kern_r)
    if texture.ndim == 2:
        left = convolve(texture, kern_l)
        right = convolve(texture, kern_r)
    else:
        left = np.stack(
            [convolve(texture[..., c], kern_l) for c in range(texture.shape[2])],
            axis=-1,
        )
        right = np.stack(
            [convolve(texture[..., c], kern_r) for c in range(texture.shape[2])],
            axis=-1,
        )
    if rng is not None and gain_jitter > 0:
        left = left * rng.uniform(1.0 - gain_jitter, 1.0 + gain_jitter)
        right = right * rng.uniform(1.0 - gain_jitter, 1.0 + gain_jitter)
    if rng is not None and noise_sigma > 0:
        left = left + rng.normal(0.0, noise_sigma, left.shape)
        right = right + rng.normal(0.0, noise_sigma, right.shape)
    return left, right


def render_dp_patch(texture, z, g, meta: CameraMeta, rng=None,
                    noise_sigma=0.0, gain_jitter=0.0):
    """(left, right) DP pair of a sharp texture at one depth, valid-cropped.

    The texture must exceed the final patch by the kernel margin; both
    outputs share the same interior region.
    """
    b = thin_lens_blur(z, g, meta.focal_length, meta.aperture_diameter)
    r = blur_to_pixel_radius(b, meta.sensor_pitch)
    return render_dp_patch_at_radius(
        texture, r, rng=rng, noise_sigma=noise_sigma, gain_jitter=gain_jitter
    )


def render_dataset(spec: SceneSpec) -> SyntheticDataset:
    """Render every view of a scene; depth maps are exact z / scale."""
    if spec.scale <= 0:
        raise ValueError(f"scale must be positive, got {spec.scale}")
    views = []
    truth = GroundTruth(
        scale=spec.scale,
        focus_distances={i: v.focus_distance for i, v in enumerate(spec.views)},
    )
    for view_id, vspec in enumerate(spec.views):
        rng = np.random.default_rng([spec.seed, view_id])
        views.append(_render_view(spec, view_id, vspec, rng, truth))
    return SyntheticDataset(views=views, truth=truth)


def _render_view(spec, view_id, vspec, rng, truth) -> DpView:
    h, w = spec.height, spec.width
    meta = vspec.meta
    if vspec.focus_distance <= meta.focal_length:
        raise ValueError(
            f"view {view_id}: focus distance {vspec.focus_distance} must exceed "
            f"focal length {meta.focal_length}"
        )
    radii = []
    for plane in vspec.planes:
        if plane.z <= meta.focal_length:
            raise ValueError(f"view {view_id}: plane depth {plane.z} behind focal length")
        b = thin_lens_blur(plane.z, vspec.focus_distance, meta.focal_length,
                           meta.aperture_diameter)
        radii.append(blur_to_pixel_radius(b, meta.sensor_pitch))
    margin = max(
        (int(math.floor(abs(r))) for r in radii), default=0
    )

    canvas = band_limited_texture(
        h + 2 * margin, w + 2 * margin, rng, channels=spec.channels
    )
    img_shape = (h, w) if spec.channels == 1 else (h, w, spec.channels)
    left = np.zeros(img_shape)
    right = np.zeros(img_shape)
    depth = np.full((h, w), np.nan)
    covered = np.zeros((h, w), dtype=bool)
    truth.planes[view_id] = []

    for plane, r in zip(vspec.planes, radii):
        if not (0 <= plane.y0 < plane.y1 <= h and 0 <= plane.x0 < plane.x1 <= w):
            raise ValueError(f"view {view_id}: plane region {plane} out of bounds")
        region = covered[plane.y0 : plane.y1, plane.x0 : plane.x1]
        if region.any():
            raise ValueError(f"view {view_id}: plane region {plane} overlaps another")
        region[:] = True

        kern_r = right_psf(r)
        hw = kern_r.side // 2
        sl_y = slice(plane.y0 + margin - hw, plane.y1 + margin + hw)
        sl_x = slice(plane.x0 + margin - hw, plane.x1 + margin + hw)
        block = canvas[sl_y, sl_x]
        pair = render_dp_patch(block, plane.z, vspec.focus_distance, meta)
        left[plane.y0 : plane.y1, plane.x0 : plane.x1] = pair[0]
        right[plane.y0 : plane.y1, plane.x0 : plane.x1] = pair[1]
        depth[plane.y0 : plane.y1, plane.x0 : plane.x1] = plane.z / spec.scale
        b = pixel_radius_to_blur(r, meta.sensor_pitch)
        truth.planes[view_id].append(
            PlaneTruth(z=plane.z, z_prime=plane.z / spec.scale, b=b, radius_px=r)
        )

    if spec.gain_jitter > 0:
        left = left * rng.uniform(1.0 - spec.gain_jitter, 1.0 + spec.gain_jitter)
        right = right * rng.uniform(1.0 - spec.gain_jitter, 1.0 + spec.gain_jitter)
    if spec.noise_sigma > 0:
        left = left + rng.normal(0.0, spec.noise_sigma, left.shape)
        right = right + rng.normal(0.0, spec.noise_sigma, right.shape)

    return DpView(view_id=view_id, left=left, right=right, depth=depth, meta=meta,
                  aperture_group=vspec.aperture_group)


def _band_regions(height, width, n_planes):
    cuts = np.linspace(0, height, n_planes + 1).astype(int)
    return [(cuts[i], cuts[i + 1], 0, width) for i in range(n_planes)]


def standard_scene(
    seed: int,
    n_views: int = 5,
    n_planes: int = 3,
    height: int = 512,
    width: int = 512,
    scale_range=(0.3, 3.0),
    focal_lengths=(0.035, 0.05, 0.085),
    f_number: float = 4.0,
    sensor_pitch: float = 5.36e-6,
    radius_range=(3.5, 9.0),
    noise_sigma: float = 0.0,
    gain_jitter: float = 0.0,
    scale: float | None = None,
) -> SceneSpec:
    """Randomized multi-view scene with blur radii inside the search range.

    Plane depths are derived from target signed blur radii (mixed signs per
    view, so every view has usable blur variation), cycling the focal
    lengths across views.  Pass an explicit scale to pin the ground truth.
    """
    rng = np.random.default_rng(seed)
    s_gt = float(rng.uniform(*scale_range)) if scale is None else float(scale)
    views = []
    for i in range(n_views):
        f = focal_lengths[i % len(focal_lengths)]
        meta = CameraMeta(
            focal_length=f, f_number=f_number, sensor_pitch=sensor_pitch,
            image_width=width, image_height=height,
        )
        g = float(rng.uniform(1.2, 2.5))
        signs = [-1.0, 1.0] + [float(rng.choice([-1.0, 1.0])) for _ in range(n_planes - 2)]
        planes = []
        for (y0, y1, x0, x1), sign in zip(_band_regions(height, width, n_planes), signs):
            r = sign * float(rng.uniform(*radius_range))
            z = depth_for_blur(pixel_radius_to_blur(r, sensor_pitch), g, f,
                               meta.aperture_diameter)
            planes.append(PlaneSpec(z=z, y0=y0, y1=y1, x0=x0, x1=x1))
        views.append(ViewSpec(focus_distance=g, meta=meta, planes=planes))
    return SceneSpec(
        scale=s_gt, height=height, width=width, views=views,
        noise_sigma=noise_sigma, gain_jitter=gain_jitter, seed=seed,
    )


def multi_aperture_scene(
    seed: int,
    f_numbers=(1.8, 4.0, 8.0),
    n_positions: int = 3,
    n_planes: int = 3,
    height: int = 512,
    width: int = 512,
    focal_length: float = 0.05,
    sensor_pitch: float = 5.36e-6,
    base_radius_range=(1.3, 1.8),
    noise_sigma: float = 0.0,
    gain_jitter: float = 0.0,
    scale: float | None = None,
) -> SceneSpec:
    """One scene captured at several apertures of the same lens.

    Each camera position is repeated once per f-number with identical
    geometry, so each (position, aperture) pair is an independent view.
    Plane depths are set from target radii at the *smallest* aperture; wider
    apertures scale the blur up proportionally, which keeps every view both
    above the blur-span threshold and inside the search range.
    """
    rng = np.random.default_rng(seed)
    s_gt = float(rng.uniform(0.3, 3.0)) if scale is None else float(scale)
    smallest = max(f_numbers)  # largest f-number = smallest aperture
    views = []
    for pos in range(n_positions):
        g = float(rng.uniform(1.2, 2.5))
        signs = [-1.0, 1.0] + [float(rng.choice([-1.0, 1.0])) for _ in range(n_planes - 2)]
        targets = [
            sign * float(rng.uniform(*base_radius_range)) for sign in signs
        ]
        ref_meta = CameraMeta(focal_length=focal_length, f_number=smallest,
                              sensor_pitch=sensor_pitch)
        depths = [
            depth_for_blur(pixel_radius_to_blur(r, sensor_pitch), g,
                           focal_length, ref_meta.aperture_diameter)
            for r in targets
        ]
        for fn in f_numbers:
            meta = CameraMeta(
                focal_length=focal_length, f_number=fn, sensor_pitch=sensor_pitch,
                image_width=width, image_height=height,
            )
            planes = [
                PlaneSpec(z=z, y0=y0, y1=y1, x0=x0, x1=x1)
                for z, (y0, y1, x0, x1) in zip(
                    depths, _band_regions(height, width, n_planes)
                )
            ]
            views.append(ViewSpec(focus_distance=g, meta=meta, planes=planes,
                                  aperture_group=f"f{fn:g}"))
    return SceneSpec(
        scale=s_gt, height=height, width=width, views=views,
        noise_sigma=noise_sigma, gain_jitter=gain_jitter, seed=seed,
    )
