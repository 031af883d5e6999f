"""End-to-end orchestration: patches -> blur -> solve -> select -> refine.

The orchestrator is the only stateful component; per-patch blur search fans
out to a thread pool and is reduced in patch order, so reports are identical
at any worker count.  Every stage failure surfaces with stage attribution in
the raised error and, where the pipeline can continue, as a recorded
per-view exclusion in the report.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .blur import BlurSearch, build_patch_grid, candidate_radii, select_top_patches
from .errors import (
    DegeneratePatchError,
    DpScaleError,
    InsufficientPatchesError,
    PipelineFailureError,
    RankDeficiencyError,
    SolverError,
)
from .metrics import scale_ratio
from .optics import pixel_radius_to_blur
from .refine import SelectedPatch, refine_scale
from .solver import (
    PatchSample,
    initial_estimate,
    select_views,
    solve_per_view,
)

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    """Every tunable of the pipeline; serialized into each report."""

    patch_size: int = 64
    stride: int = 64
    r_max: float = 15.0
    blur_step: float = 0.5
    blur_fine_step: float = 0.05  # local second-pass grid; 0 disables
    min_blur_span_px: float = 2.0  # views with blur span <= this are dropped
    max_views: int = 5  # kept after median-distance ranking
    top_patch_percent: float = 50.0  # per-view share of patches kept, by loss
    scale_half_range: float = 0.8  # refinement search half-width fraction
    n_candidates: int = 100
    irls_eps: float = 1e-8
    irls_eps_rel: float = 0.05  # weight floor relative to median |rhs|
    irls_tol: float = 1e-10
    irls_max_iter: int = 100
    texture_percentile: float = 0.0
    min_finite_frac: float = 0.9
    max_inv_depth_rel_std: float = 0.05
    threads: int = 0  # 0 = available parallelism
    seed: int = 0
    gamma: float = 1.0

    def effective_r_max(self) -> float:
        return min(self.r_max, self.patch_size / 4.0)

    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


def _estimate_view_blurs(view, grid, search, pool):
    """Blur estimates for every valid patch; degenerate patches are recorded."""
    chan_l, chan_r = view.estimation_channel()
    m = grid.patch_size
    tasks = [grid.record(pid) for pid in grid.valid_ids()]

    def work(rec):
        gl = chan_l[rec.y0 : rec.y0 + m, rec.x0 : rec.x0 + m]
        gr = chan_r[rec.y0 : rec.y0 + m, rec.x0 : rec.x0 + m]
        try:
            return search.estimate(gl, gr, patch_id=rec.patch_id, view_id=view.view_id)
        except DegeneratePatchError:
            return rec.patch_id

    results = list(pool.map(work, tasks)) if pool else [work(t) for t in tasks]
    estimates, degenerate = [], []
    for res in results:
        if isinstance(res, int):
            degenerate.append(res)
        else:
            estimates.append(res)
    return estimates, degenerate


def run_estimate(views, config: RunConfig, ground_truth_scale=None) -> dict:
    """Run the full scale-recovery pipeline over in-memory views.

    Returns the report dictionary; raises a stage-attributed error when no
    usable estimate can be produced.
    """
    t_start = time.perf_counter()
    timings = {}
    if not views:
        raise PipelineFailureError("no views supplied")
    metas = {v.view_id: v.meta for v in views}
    r_max = config.effective_r_max()
    radii = candidate_radii(r_max, config.blur_step)

    report_views = {}
    exclusions = {}
    per_view_solutions = {}
    blur_spans = {}
    samples_by_view = {}
    grids = {}
    estimates_by_view = {}

    n_workers = config.worker_count()
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        search_by_shape = {}
        t0 = time.perf_counter()
        for view in views:
            grid = build_patch_grid(
                view,
                config.patch_size,
                config.stride,
                texture_percentile=config.texture_percentile,
                min_finite_frac=config.min_finite_frac,
                max_inv_depth_rel_std=config.max_inv_depth_rel_std,
            )
            grids[view.view_id] = grid
            shape = (config.patch_size, config.patch_size)
            if shape not in search_by_shape:
                search_by_shape[shape] = BlurSearch(
                    radii, shape, fine_step=config.blur_fine_step
                )
            estimates, degenerate = _estimate_view_blurs(
                view, grid, search_by_shape[shape], pool
            )
            estimates_by_view[view.view_id] = estimates
            report_views[view.view_id] = {
                "n_patches": len(grid.records),
                "n_valid_patches": len(grid.valid_ids()),
                "degenerate_patches": degenerate,
                "blur_estimates": [
                    {
                        "patch_id": est.patch_id,
                        "x0": grid.record(est.patch_id).x0,
                        "y0": grid.record(est.patch_id).y0,
                        "radius_px": est.radius_px,
                        "loss": est.loss,
                    }
                    for est in estimates
                ],
            }
        timings["blur_estimation_s"] = time.perf_counter() - t0
    finally:
        if pool:
            pool.shutdown()

    t0 = time.perf_counter()
    for view in views:
        view_id = view.view_id
        grid = grids[view_id]
        estimates = estimates_by_view[view_id]
        try:
            top_ids = select_top_patches(grid, estimates, config.top_patch_percent)
        except InsufficientPatchesError as exc:
            exclusions[view_id] = f"patch selection: {exc}"
            continue
        by_id = {est.patch_id: est for est in estimates}
        samples = [
            PatchSample.create(
                view_id=view_id,
                z_prime=grid.record(pid).depth_median,
                b=pixel_radius_to_blur(by_id[pid].radius_px, view.meta.sensor_pitch),
                meta=view.meta,
                patch_id=pid,
            )
            for pid in top_ids
        ]
        samples_by_view[view_id] = samples
        spans = [by_id[pid].radius_px for pid in top_ids]
        blur_spans[view_id] = float(max(spans) - min(spans))
        try:
            per_view_solutions[view_id] = solve_per_view(
                samples,
                view.meta,
                max_iter=config.irls_max_iter,
                eps=config.irls_eps,
                tol=config.irls_tol,
                eps_rel=config.irls_eps_rel,
            )
        except (InsufficientPatchesError, RankDeficiencyError) as exc:
            exclusions[view_id] = f"per-view solve: {exc}"
        report_views[view_id]["selected_patches"] = top_ids
        report_views[view_id]["blur_span_px"] = blur_spans[view_id]

    if not per_view_solutions:
        reasons = [exclusions.get(v.view_id, "") for v in views]
        if reasons and all("rank below" in r for r in reasons):
            raise RankDeficiencyError(
                "per-view solves: every view lacks depth/blur variation "
                f"({exclusions})",
                view_ids=sorted(exclusions),
            )
        raise PipelineFailureError(
            "view preparation: no view produced a per-view solution",
            exclusions=exclusions,
        )

    selection = select_views(
        per_view_solutions, blur_spans, config.min_blur_span_px, config.max_views
    )
    exclusions.update(selection.exclusions)
    timings["view_selection_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    joint_samples = [
        smp for v in selection.selected for smp in samples_by_view[v]
    ]
    try:
        solution = initial_estimate(
            joint_samples,
            metas,
            max_iter=config.irls_max_iter,
            eps=config.irls_eps,
            tol=config.irls_tol,
            eps_rel=config.irls_eps_rel,
        )
    except (RankDeficiencyError, SolverError) as exc:
        raise type(exc)(f"initial estimation: {exc}") from exc
    s_initial = solution.s
    g_prime = {v: solution.g_prime(v) for v in selection.selected}
    timings["initial_estimate_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    view_by_id = {v.view_id: v for v in views}
    selected_patches = []
    for view_id in selection.selected:
        view = view_by_id[view_id]
        grid = grids[view_id]
        m = grid.patch_size
        for smp in samples_by_view[view_id]:
            rec = grid.record(smp.patch_id)
            chans = view.channels()
            selected_patches.append(
                SelectedPatch(
                    view_id=view_id,
                    patch_id=smp.patch_id,
                    z_prime=smp.z_prime,
                    channels_left=[
                        cl[rec.y0 : rec.y0 + m, rec.x0 : rec.x0 + m] for cl, _ in chans
                    ],
                    channels_right=[
                        cr[rec.y0 : rec.y0 + m, rec.x0 : rec.x0 + m] for _, cr in chans
                    ],
                )
            )
    refinement = refine_scale(
        s_initial,
        g_prime,
        selected_patches,
        metas,
        t_s=config.scale_half_range,
        count=config.n_candidates,
        r_cap=r_max,
    )
    timings["refinement_s"] = time.perf_counter() - t0
    timings["total_s"] = time.perf_counter() - t_start

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "package_version": __version__,
        "config": asdict(config),
        "s_initial": s_initial,
        "s_optim": refinement.s_optim,
        "selected_views": selection.selected,
        "per_view": {
            str(v): {
                "scale": selection.per_view_scale.get(v),
                "g_bar": solution.g_bar.get(v),
                "g": solution.g(v) if v in solution.g_bar else None,
                "g_prime": g_prime.get(v),
            }
            for v in sorted(per_view_solutions)
        },
        "median_per_view_scale": selection.median_scale,
        "exclusions": {str(k): v for k, v in sorted(exclusions.items())},
        "views": {str(k): v for k, v in sorted(report_views.items())},
        "refinement": {
            "candidates": [float(s) for s in refinement.candidates.values],
            "losses": [float(x) for x in refinement.losses],
            "skipped_channels": refinement.skipped_channels,
        },
        "timings": timings,
    }
    if ground_truth_scale is not None:
        report["ground_truth_scale"] = ground_truth_scale
        report["scale_ratio_initial"] = scale_ratio(s_initial, ground_truth_scale)
        report["scale_ratio_optim"] = scale_ratio(refinement.s_optim, ground_truth_scale)
    return report
