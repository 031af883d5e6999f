"""Metric scale recovery for multi-view reconstructions from dual-pixel pairs."""

__version__ = "0.1.0"

from .optics import (
    CameraMeta,
    aperture_diameter,
    blur_to_pixel_radius,
    depth_for_blur,
    pixel_radius_to_blur,
    thin_lens_blur,
)
from .psf import PsfKernel, convolve, disk, flip_h, normalize_l1, right_psf
from .blur import (
    BlurEstimate,
    BlurSearch,
    PatchGrid,
    build_patch_grid,
    candidate_radii,
    estimate_patch_blur,
    select_top_patches,
)
from .solver import (
    LinearSystem,
    PatchSample,
    ScaleSolution,
    assemble_system,
    gamma,
    initial_estimate,
    select_views,
    solve_l1_irls,
    solve_least_squares,
    solve_per_view,
)
from .refine import (
    CandidateSet,
    RefinementRecord,
    SelectedPatch,
    blur_radius_at_scale,
    candidate_scales,
    cross_view_loss,
    refine_scale,
)
from .synth import (
    PlaneSpec,
    SceneSpec,
    SyntheticDataset,
    ViewSpec,
    band_limited_texture,
    multi_aperture_scene,
    render_dataset,
    render_dp_patch,
    render_dp_patch_at_radius,
    standard_scene,
)
from .metrics import ScaleReport, average_error, scale_ratio
from .views import DpView
from .pipeline import RunConfig, run_estimate

__all__ = [
    "CameraMeta",
    "DpView",
    "RunConfig",
    "aperture_diameter",
    "thin_lens_blur",
    "depth_for_blur",
    "blur_to_pixel_radius",
    "pixel_radius_to_blur",
    "PsfKernel",
    "disk",
    "right_psf",
    "flip_h",
    "convolve",
    "normalize_l1",
    "BlurEstimate",
    "BlurSearch",
    "PatchGrid",
    "candidate_radii",
    "estimate_patch_blur",
    "build_patch_grid",
    "select_top_patches",
    "PatchSample",
    "LinearSystem",
    "ScaleSolution",
    "gamma",
    "assemble_system",
    "solve_l1_irls",
    "solve_least_squares",
    "solve_per_view",
    "select_views",
    "initial_estimate",
    "CandidateSet",
    "RefinementRecord",
    "SelectedPatch",
    "candidate_scales",
    "blur_radius_at_scale",
    "cross_view_loss",
    "refine_scale",
    "SceneSpec",
    "ViewSpec",
    "PlaneSpec",
    "SyntheticDataset",
    "band_limited_texture",
    "render_dp_patch",
    "render_dp_patch_at_radius",
    "render_dataset",
    "standard_scene",
    "multi_aperture_scene",
    "scale_ratio",
    "average_error",
    "ScaleReport",
    "run_estimate",
]
