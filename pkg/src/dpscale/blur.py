"""Per-patch signed blur estimation by grid search over the cross-view loss.

For a candidate radius r the left patch is blurred with the right-view PSF
and the right patch with the left-view PSF; when r matches the real blur the
two re-blurred patches coincide and the Frobenius residual vanishes.  The
search is exhaustive over a fixed candidate grid: the loss landscape is
non-smooth under discrete disk rasterization, so continuous optimizers are
a poor fit here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePatchError, InsufficientPatchesError
from .psf import PairConvolver, right_psf
from .views import DpView

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlurEstimate:
    radius_px: float
    loss: float
    patch_id: int = -1
    view_id: int = -1


@dataclass
class PatchRecord:
    patch_id: int
    x0: int
    y0: int
    texture: float
    depth_median: float
    inv_depth_rel_std: float
    finite_frac: float
    valid: bool
    reason: str = ""


@dataclass
class PatchGrid:
    patch_size: int
    stride: int
    records: list[PatchRecord] = field(default_factory=list)

    def valid_ids(self) -> list[int]:
        return [rec.patch_id for rec in self.records if rec.valid]

    def record(self, patch_id: int) -> PatchRecord:
        return self.records[patch_id]


def candidate_radii(r_max: float, step: float = 0.5) -> np.ndarray:
    """Symmetric candidate grid [-r_max, +r_max] at the given step."""
    if r_max <= 0 or step <= 0:
        raise ValueError(f"r_max and step must be positive, got {r_max}, {step}")
    n = int(round(2.0 * r_max / step))
    return np.linspace(-r_max, r_max, n + 1)


class BlurSearch:
    """Grid search plan reusable across all patches of one shape.

    Candidate kernels and their transforms are built once; each patch pair
    then costs two forward FFTs plus one inverse FFT per candidate.  With a
    fine_step, the coarse argmin is followed by a second exhaustive pass on
    a local fine grid around it, which beats down the coherent rounding that
    otherwise leaks into the focus-distance solve (still a pure discrete
    search; no interpolation between evaluated losses).
    """

    def __init__(self, candidates, patch_shape, fine_step: float = 0.0):
        candidates = np.asarray(candidates, dtype=np.float64)
        if candidates.size == 0:
            raise ValueError("candidate list is empty")
        if np.any(np.diff(candidates) <= 0):
            raise ValueError("candidates must be strictly increasing")
        self.candidates = candidates
        self.patch_shape = tuple(patch_shape)
        self.fine_step = float(fine_step)
        self.r_peak = float(np.max(np.abs(candidates)))
        self.kernel_side = 2 * int(math.floor(self.r_peak)) + 1
        if self.kernel_side >= min(self.patch_shape):
            raise ValueError(
                f"kernel side {self.kernel_side} for r_max {self.r_peak} does not fit "
                f"patches of shape {self.patch_shape}"
            )
        self._probe = PairConvolver(
            np.zeros(self.patch_shape), np.zeros(self.patch_shape), self.kernel_side
        )
        self._plans = {}  # radius -> (kernel, fft, flipped fft)
        for r in candidates:
            self._plan_for(float(r))

    def _plan_for(self, r: float):
        plan = self._plans.get(r)
        if plan is None:
            kernel = right_psf(r)
            fk, fkf = self._probe.kernel_ffts(kernel)
            plan = (kernel, fk, fkf)
            self._plans[r] = plan
        return plan

    def _coarse_step(self) -> float:
        diffs = np.diff(self.candidates)
        return float(diffs.min()) if diffs.size else 0.0

    @staticmethod
    def _argmin(radii, losses):
        best = None
        for r, loss in zip(radii, losses):
            key = (loss, abs(r), r)
            if best is None or key < best:
                best = key
        return best[2], best[0]

    @staticmethod
    def _plateau_center(radii, losses):
        """Middle of the tied-minimum run around the tie-break winner.

        Distinct radii sharing one rasterized kernel produce bitwise-equal
        losses; the data cannot localize the radius inside such a run, and
        the center is the unbiased pick (edges would drag every estimate of
        a plane the same way).
        """
        min_loss = min(losses)
        winner, _ = BlurSearch._argmin(radii, losses)
        idx = radii.index(winner)
        lo = hi = idx
        while lo > 0 and losses[lo - 1] == min_loss:
            lo -= 1
        while hi + 1 < len(losses) and losses[hi + 1] == min_loss:
            hi += 1
        mid = (lo + hi) // 2
        return radii[mid], losses[mid]

    def _losses(self, conv, radii):
        out = []
        for r in radii:
            kernel, fk, fkf = self._plan_for(float(r))
            out.append(conv.cross_diff_norm(kernel, fk, fkf))
        return out

    def estimate(self, g_l, g_r, patch_id=-1, view_id=-1) -> BlurEstimate:
        if g_l.shape != self.patch_shape or g_r.shape != self.patch_shape:
            raise ValueError(
                f"patch shape {g_l.shape} does not match plan {self.patch_shape}"
            )
        if np.ptp(g_l) == 0 or np.ptp(g_r) == 0:
            raise DegeneratePatchError(
                f"constant patch (view {view_id}, patch {patch_id}) carries no blur cue"
            )
        conv = PairConvolver(g_l, g_r, self.kernel_side)
        losses = self._losses(conv, list(self.candidates))
        best_r, best_loss = self._argmin(self.candidates, losses)
        if self.fine_step > 0:
            half = self._coarse_step() / 2.0 + self.fine_step
            n = int(math.ceil(half / self.fine_step))
            local = best_r + self.fine_step * np.arange(-n, n + 1)
            local = [float(r) for r in local if abs(r) <= self.r_peak]
            best_r, best_loss = self._plateau_center(local, self._losses(conv, local))
        return BlurEstimate(
            radius_px=float(best_r),
            loss=float(best_loss),
            patch_id=patch_id,
            view_id=view_id,
        )


def estimate_patch_blur(g_l, g_r, candidates, patch_id=-1, view_id=-1) -> BlurEstimate:
    """One-off grid search over the cross-view re-blur loss.

    Ties break toward smaller |r| (then toward negative r for determinism).
    Use BlurSearch directly when estimating many same-shaped patches.
    """
    return BlurSearch(candidates, g_l.shape).estimate(g_l, g_r, patch_id, view_id)


def build_patch_grid(
    view: DpView,
    patch_size: int,
    stride: int,
    texture_percentile: float = 0.0,
    min_finite_frac: float = 0.9,
    max_inv_depth_rel_std: float = 0.05,
) -> PatchGrid:
    """Tile a view into patches and flag the ones usable for blur estimation.

    A patch is valid when enough of its depth pixels are finite, the inverse
    depth is near-constant (the blur model assumes one depth per patch), and
    its gradient energy clears the configured percentile across the view.
    """
    h, w = view.depth.shape
    if patch_size > min(h, w):
        raise ValueError(f"patch size {patch_size} exceeds image {h}x{w}")
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    left_chan, _ = view.estimation_channel()
    gy, gx = np.gradient(left_chan)
    grad_mag = np.hypot(gx, gy)

    records = []
    patch_id = 0
    for y0 in range(0, h - patch_size + 1, stride):
        for x0 in range(0, w - patch_size + 1, stride):
            dwin = view.depth[y0 : y0 + patch_size, x0 : x0 + patch_size]
            finite = np.isfinite(dwin) & (dwin > 0)
            finite_frac = float(finite.mean())
            texture = float(grad_mag[y0 : y0 + patch_size, x0 : x0 + patch_size].mean())
            depth_median = float("nan")
            rel_std = float("inf")
            reason = ""
            if finite_frac < min_finite_frac:
                reason = "depth coverage below threshold"
            else:
                vals = dwin[finite]
                depth_median = float(np.median(vals))
                inv = 1.0 / vals
                mean_inv = float(inv.mean())
                rel_std = float(inv.std() / mean_inv) if mean_inv > 0 else float("inf")
                if rel_std >= max_inv_depth_rel_std:
                    reason = "inverse-depth spread above threshold"
            records.append(
                PatchRecord(
                    patch_id=patch_id,
                    x0=x0,
                    y0=y0,
                    texture=texture,
                    depth_median=depth_median,
                    inv_depth_rel_std=rel_std,
                    finite_frac=finite_frac,
                    valid=reason == "",
                    reason=reason,
                )
            )
            patch_id += 1

    scores = np.array([rec.texture for rec in records if rec.valid])
    if scores.size:
        threshold = float(np.percentile(scores, texture_percentile))
        for rec in records:
            if rec.valid and rec.texture < threshold:
                rec.valid = False
                rec.reason = "texture below percentile threshold"

    grid = PatchGrid(patch_size=patch_size, stride=stride, records=records)
    if not grid.valid_ids():
        log.warning("view %d: no valid patches in %dx%d grid", view.view_id, h, w)
    return grid


def select_top_patches(grid: PatchGrid, estimates, t_c: float) -> list[int]:
    """Keep the top t_c percent of valid patches, ranked by ascending residual.

    At least two patches are always returned when two exist; a lone patch
    cannot constrain both unknowns of the per-view solve.
    """
    if not 0 < t_c <= 100:
        raise ValueError(f"t_c must be in (0, 100], got {t_c}")
    valid = set(grid.valid_ids())
    usable = [est for est in estimates if est.patch_id in valid]
    if len(usable) < 2:
        raise InsufficientPatchesError(
            f"{len(usable)} usable patches; at least 2 required"
        )
    usable.sort(key=lambda est: (est.loss, est.patch_id))
    keep = max(2, math.ceil(t_c / 100.0 * len(usable)))
    return [est.patch_id for est in usable[:keep]]
