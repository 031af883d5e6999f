"""Joint estimation of the global scene scale and per-view focus distances.

Each patch with scale-ambiguous depth z', blur diameter b (meters) and
aperture diameter l contributes one linear equation

    gamma * (1/g_i) - l_i * (1/s) = b * z' / f_i,      gamma = z' * (b + l_i)

so the unknowns [1/g_1 .. 1/g_n, 1/s] solve an over-determined system.  The
system is solved under an L1 objective via iteratively reweighted least
squares, which suppresses gross blur outliers; the per-view solves plus the
median-based view selection weed out views with too little blur variation or
inverted blur/depth correlation before the joint solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientPatchesError,
    PipelineFailureError,
    RankDeficiencyError,
    SolverError,
)
from .optics import CameraMeta


@dataclass(frozen=True)
class PatchSample:
    """One patch's contribution: ambiguous depth, metric blur, coefficient."""

    view_id: int
    z_prime: float
    b: float
    gamma: float
    patch_id: int = -1

    @classmethod
    def create(cls, view_id, z_prime, b, meta: CameraMeta, patch_id=-1):
        return cls(
            view_id=view_id,
            z_prime=z_prime,
            b=b,
            gamma=gamma(z_prime, b, meta.aperture_diameter),
            patch_id=patch_id,
        )


def gamma(z_prime: float, b: float, l: float) -> float:
    """Coefficient z' * (b + l); b and l must share units (meters here)."""
    value = z_prime * (b + l)
    if not math.isfinite(value):
        raise ValueError(f"gamma is not finite for z'={z_prime}, b={b}, l={l}")
    return value


@dataclass
class LinearSystem:
    a: np.ndarray  # (rows, n_views + 1)
    rhs: np.ndarray
    view_ids: list[int]  # column order of the focus-distance unknowns
    row_map: list[tuple[int, int]]  # (view_id, patch_id) per row

    @property
    def n_views(self) -> int:
        return len(self.view_ids)


@dataclass
class ScaleSolution:
    s_bar: float
    g_bar: dict[int, float]
    view_ids: list[int]
    residuals: np.ndarray
    row_map: list[tuple[int, int]]

    @property
    def negative_scale(self) -> bool:
        return not (math.isfinite(self.s_bar) and self.s_bar > 0)

    @property
    def s(self) -> float:
        return 1.0 / self.s_bar if not self.negative_scale else float("nan")

    def g(self, view_id: int) -> float:
        gb = self.g_bar[view_id]
        return 1.0 / gb if gb > 0 else float("nan")

    def g_prime(self, view_id: int) -> float:
        """Scale-ambiguous focus distance g_i / s."""
        gb = self.g_bar[view_id]
        if gb <= 0 or self.negative_scale:
            return float("nan")
        return self.s_bar / gb

    @property
    def objective_l1(self) -> float:
        return float(np.abs(self.residuals).sum())

    @property
    def mean_abs_residual(self) -> float:
        return float(np.abs(self.residuals).mean()) if self.residuals.size else 0.0


def assemble_system(samples, metas: dict[int, CameraMeta]) -> LinearSystem:
    """Stack per-patch equations into the block-structured system.

    Every row has exactly two nonzeros: the patch's gamma in its view's
    column and -l_i in the shared last column.  Raises RankDeficiencyError
    when the unknowns are not jointly determined, naming the views whose
    gamma values carry no variation.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientPatchesError(f"{len(samples)} samples; at least 2 required")
    view_ids = sorted({s.view_id for s in samples})
    missing = [v for v in view_ids if v not in metas]
    if missing:
        raise ValueError(f"missing camera meta for views {missing}")
    col = {v: i for i, v in enumerate(view_ids)}
    n = len(view_ids)
    a = np.zeros((len(samples), n + 1))
    rhs = np.empty(len(samples))
    row_map = []
    for r, smp in enumerate(samples):
        meta = metas[smp.view_id]
        if not (smp.z_prime > 0 and math.isfinite(smp.z_prime)):
            raise ValueError(f"z' must be positive and finite, got {smp.z_prime}")
        a[r, col[smp.view_id]] = smp.gamma
        a[r, n] = -meta.aperture_diameter
        rhs[r] = smp.b * smp.z_prime / meta.focal_length
        row_map.append((smp.view_id, smp.patch_id))

    if np.linalg.matrix_rank(a) < n + 1:
        flat = []
        for v in view_ids:
            gammas = [s.gamma for s in samples if s.view_id == v]
            span = max(gammas) - min(gammas)
            if span <= 1e-12 * max(1.0, max(abs(g) for g in gammas)):
                flat.append(v)
        raise RankDeficiencyError(
            f"system rank below {n + 1}; views without gamma variation: {flat}",
            view_ids=flat,
        )
    return LinearSystem(a=a, rhs=rhs, view_ids=view_ids, row_map=row_map)


def _unpack(x, system: LinearSystem) -> ScaleSolution:
    residuals = system.a @ x - system.rhs
    n = system.n_views
    return ScaleSolution(
        s_bar=float(x[n]),
        g_bar={v: float(x[i]) for i, v in enumerate(system.view_ids)},
        view_ids=list(system.view_ids),
        residuals=residuals,
        row_map=list(system.row_map),
    )


def solve_least_squares(system: LinearSystem) -> ScaleSolution:
    """Plain unweighted L2 solve; the robustness baseline for comparisons."""
    x, *_ = np.linalg.lstsq(system.a, system.rhs, rcond=None)
    if not np.all(np.isfinite(x)):
        raise SolverError("least-squares solution is not finite")
    return _unpack(x, system)


def solve_l1_irls(
    system: LinearSystem,
    max_iter: int = 100,
    eps: float = 1e-8,
    tol: float = 1e-10,
    eps_rel: float = 0.0,
) -> ScaleSolution:
    """Approximate argmin of the L1 residual via reweighted least squares.

    Weights are 1/max(|residual|, floor) with floor = max(eps,
    eps_rel * median|rhs|); iteration stops when the relative solution change
    drops below tol.  The relative floor keeps residuals below the
    measurement quantization in the equal-weight (averaging) regime instead
    of letting the L1 fit interpolate a lucky subset, while gross outliers
    sit far above it and stay suppressed.  max_iter = 0 degenerates to the
    plain least-squares solution.
    """
    floor = eps
    if eps_rel > 0 and system.rhs.size:
        floor = max(floor, eps_rel * float(np.median(np.abs(system.rhs))))
    x, *_ = np.linalg.lstsq(system.a, system.rhs, rcond=None)
    if not np.all(np.isfinite(x)):
        raise SolverError("initial least-squares solution is not finite")
    for _ in range(max_iter):
        res = system.a @ x - system.rhs
        w = 1.0 / np.maximum(np.abs(res), floor)
        sw = np.sqrt(w)
        x_new, *_ = np.linalg.lstsq(system.a * sw[:, None], system.rhs * sw, rcond=None)
        if not np.all(np.isfinite(x_new)):
            raise SolverError("weighted least-squares iteration diverged")
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1e-300)
        x = x_new
        if change < tol:
            break
    return _unpack(x, system)


def solve_per_view(view_samples, meta: CameraMeta, **irls_kwargs) -> ScaleSolution:
    """Two-unknown solve [1/g_i, 1/s] from a single view's samples."""
    view_samples = list(view_samples)
    if len(view_samples) < 2:
        raise InsufficientPatchesError(
            f"{len(view_samples)} samples in view; at least 2 required"
        )
    view_ids = {s.view_id for s in view_samples}
    if len(view_ids) != 1:
        raise ValueError(f"samples span several views: {sorted(view_ids)}")
    system = assemble_system(view_samples, {view_samples[0].view_id: meta})
    return solve_l1_irls(system, **irls_kwargs)


@dataclass
class ViewSelection:
    selected: list[int]
    exclusions: dict[int, str] = field(default_factory=dict)
    per_view_scale: dict[int, float] = field(default_factory=dict)
    median_scale: float = float("nan")


def select_views(per_view: dict[int, ScaleSolution], blur_spans_px: dict[int, float],
                 t_p: float, n_v: int) -> ViewSelection:
    """Drop unusable views, then keep the n_v closest to the median scale.

    A view is unusable when its estimated blur span (max - min, pixels) is
    at most t_p, or when its independent solve gives a non-positive scale.
    The median is taken over the survivors; distance ties break by lower
    per-view residual, then by view id.
    """
    exclusions: dict[int, str] = {}
    survivors: dict[int, ScaleSolution] = {}
    for view_id, sol in per_view.items():
        span = blur_spans_px.get(view_id, 0.0)
        if span <= t_p:
            exclusions[view_id] = f"blur span {span:.3g} px <= threshold {t_p:g} px"
        elif sol.negative_scale:
            exclusions[view_id] = f"non-positive scale estimate (1/s = {sol.s_bar:.3g})"
        else:
            survivors[view_id] = sol
    if not survivors:
        raise PipelineFailureError(
            "no view survived selection", exclusions=exclusions
        )
    scales = {v: sol.s for v, sol in survivors.items()}
    median = float(np.median(list(scales.values())))
    ranked = sorted(
        survivors,
        key=lambda v: (abs(scales[v] - median), survivors[v].mean_abs_residual, v),
    )
    kept = ranked[: max(1, n_v)]
    for v in ranked[max(1, n_v):]:
        exclusions[v] = f"scale {scales[v]:.4g} ranked beyond the {n_v} nearest the median"
    return ViewSelection(
        selected=sorted(kept),
        exclusions=exclusions,
        per_view_scale=scales,
        median_scale=median,
    )


def initial_estimate(selected_samples, metas: dict[int, CameraMeta],
                     **irls_kwargs) -> ScaleSolution:
    """Joint IRLS over every selected patch of every selected view."""
    system = assemble_system(selected_samples, metas)
    solution = solve_l1_irls(system, **irls_kwargs)
    if solution.negative_scale:
        raise SolverError(
            f"joint solve produced non-positive scale (1/s = {solution.s_bar:.3g})"
        )
    bad = [v for v in solution.view_ids if solution.g_bar[v] <= 0]
    if bad:
        raise SolverError(
            f"joint solve produced non-positive focus distance for views {bad}; "
            "view selection likely passed an inconsistent view"
        )
    return solution
