"""Discrete scale refinement by cross-view DP alignment.

With the scaled focus distances frozen, every scale candidate implies a
per-patch blur radius through the thin-lens model; re-blurring each side of
a DP pair with the other side's PSF and comparing the L1-normalized results
scores the candidate.  The candidate minimizing the summed loss over all
selected patches and channels is the refined scale.  Only the scale is
searched: joint optimization with the focus distances from a cold start is
known to be unstable, which is what the discrete search avoids.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CandidateError, DegeneratePatchError
from .optics import CameraMeta, blur_to_pixel_radius, thin_lens_blur
from .psf import PairConvolver, PsfKernel, flip_h, normalize_l1, right_psf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateSet:
    values: np.ndarray
    center: float
    half_width_frac: float

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def step(self) -> float:
        return float(self.values[1] - self.values[0]) if self.count > 1 else 0.0


def candidate_scales(s_star: float, t_s: float, count: int) -> CandidateSet:
    """Uniform candidates on [s*(1 - t_s), s*(1 + t_s)], endpoints included."""
    if not (s_star > 0 and math.isfinite(s_star)):
        raise ValueError(f"s_star must be positive, got {s_star}")
    if not 0 < t_s < 1:
        raise ValueError(f"t_s must be in (0, 1), got {t_s}")
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")
    values = np.linspace(s_star * (1.0 - t_s), s_star * (1.0 + t_s), count)
    positive = values > 0
    if not positive.all():
        log.warning("clipping %d non-positive scale candidates", int((~positive).sum()))
        values = values[positive]
    if values.size == 0:
        raise CandidateError("candidate set is empty after clipping")
    return CandidateSet(values=values, center=s_star, half_width_frac=t_s)


def blur_radius_at_scale(s: float, z_prime: float, g_prime_star: float,
                         meta: CameraMeta) -> float:
    """Signed pixel radius implied by candidate scale s for one patch.

    Both the focus distance and the patch depth are scale-ambiguous; the
    candidate converts them to meters before the thin-lens evaluation.
    """
    if s <= 0 or z_prime <= 0 or g_prime_star <= 0:
        raise ValueError(
            f"s, z', g'* must be positive, got {s}, {z_prime}, {g_prime_star}"
        )
    b = thin_lens_blur(
        s * z_prime, s * g_prime_star, meta.focal_length, meta.aperture_diameter
    )
    return blur_to_pixel_radius(b, meta.sensor_pitch)


@dataclass
class SelectedPatch:
    """One refinement patch pair: per-channel pixels plus its median depth."""

    view_id: int
    patch_id: int
    z_prime: float
    channels_left: list[np.ndarray]
    channels_right: list[np.ndarray]


@dataclass
class RefinementRecord:
    candidates: CandidateSet
    losses: np.ndarray
    s_optim: float
    skipped_channels: int = 0
    per_patch_losses: dict = field(default_factory=dict)


class _PatchPlan:
    """Precomputed FFT state for one patch pair, reused across candidates."""

    def __init__(self, patch: SelectedPatch, kernel_side: int):
        self.patch = patch
        self.convs = [
            PairConvolver(gl, gr, kernel_side)
            for gl, gr in zip(patch.channels_left, patch.channels_right)
        ]

    def loss(self, kernel: PsfKernel):
        fk, fkf = self.convs[0].kernel_ffts(kernel)
        total = 0.0
        skipped = 0
        for conv in self.convs:
            left = conv.irfft_product(conv.left_fft * fk)
            right = conv.irfft_product(conv.right_fft * fkf)
            try:
                total += float(np.abs(normalize_l1(left) - normalize_l1(right)).sum())
            except DegeneratePatchError:
                skipped += 1
        return total, skipped, len(self.convs)


def _build_plans(selected, kernel_side):
    return [_PatchPlan(p, kernel_side) for p in selected]


def _candidate_loss(s, plans, g_prime_star, metas, r_cap, kernel_cache):
    """Total loss for one candidate; inf when any radius is unevaluable."""
    total = 0.0
    skipped = 0
    evaluated = 0
    per_patch = {}
    for plan in plans:
        patch = plan.patch
        meta = metas[patch.view_id]
        g_prime = g_prime_star[patch.view_id]
        if s * g_prime <= meta.focal_length:
            return float("inf"), 0, 0, {}
        r = blur_radius_at_scale(s, patch.z_prime, g_prime, meta)
        if abs(r) > r_cap:
            return float("inf"), 0, 0, {}
        key = r
        if key not in kernel_cache:
            kernel_cache[key] = right_psf(r)
        loss, n_skip, n_chan = plan.loss(kernel_cache[key])
        total += loss
        skipped += n_skip
        evaluated += n_chan - n_skip
        per_patch[(patch.view_id, patch.patch_id)] = loss
    if evaluated == 0:
        raise CandidateError("every channel contribution was degenerate")
    return total, skipped, evaluated, per_patch


def cross_view_loss(s, selected, g_prime_star, metas, r_cap=15.0) -> float:
    """Summed alignment loss of one scale candidate over the selected set."""
    side = 2 * int(math.floor(r_cap)) + 1
    plans = _build_plans(selected, side)
    total, _, _, _ = _candidate_loss(s, plans, g_prime_star, metas, r_cap, {})
    return total


def refine_scale(
    s_star: float,
    g_prime_star: dict[int, float],
    selected: list[SelectedPatch],
    metas: dict[int, CameraMeta],
    t_s: float = 0.8,
    count: int = 100,
    r_cap: float = 15.0,
) -> RefinementRecord:
    """Exhaustive candidate search; ties resolve toward the candidate nearest s*.

    Candidates whose implied blur exceeds r_cap pixels (or put the focal
    plane behind the lens) score +inf so the candidate indexing stays stable.
    """
    if not selected:
        raise CandidateError("no patches selected for refinement")
    cands = candidate_scales(s_star, t_s, count)
    side = 2 * int(math.floor(r_cap)) + 1
    plans = _build_plans(selected, side)
    kernel_cache: dict[float, PsfKernel] = {}
    losses = np.empty(cands.count)
    skipped_total = 0
    best_per_patch: dict = {}
    for i, s in enumerate(cands.values):
        losses[i], n_skip, _, per_patch = _candidate_loss(
            float(s), plans, g_prime_star, metas, r_cap, kernel_cache
        )
        skipped_total += n_skip
        if per_patch:
            best_per_patch[i] = per_patch
    if not np.any(np.isfinite(losses)):
        raise CandidateError("every scale candidate was unevaluable")
    min_loss = np.min(losses[np.isfinite(losses)])
    tied = [i for i in range(cands.count) if losses[i] == min_loss]
    best = min(tied, key=lambda i: (abs(cands.values[i] - s_star), i))
    return RefinementRecord(
        candidates=cands,
        losses=losses,
        s_optim=float(cands.values[best]),
        skipped_channels=skipped_total,
        per_patch_losses=best_per_patch.get(best, {}),
    )
