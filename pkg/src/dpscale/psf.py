"""Parametric left/right sub-aperture PSFs, patch convolution, L1 normalization.

The right-view kernel for a signed pixel radius r is a sum over integer
shifts k = 0..floor(|2r|) of the element-wise product of a centered binary
disk of radius |r| with the same disk shifted by k*sign(r) along x.  The
left-view kernel is its horizontal mirror.  Kernels are rescaled to unit sum;
per-patch L1 normalization of the convolved patches is what cancels
multiplicative gain artifacts, so the unit sum only improves conditioning.

Patches are plain 2-D float arrays throughout this package; color images are
handled channel-by-channel by the callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.signal

from .errors import DegeneratePatchError


@dataclass(frozen=True)
class PsfKernel:
    """Discrete nonnegative kernel with its signed pixel-radius parameter."""

    radius_px: float
    grid: np.ndarray  # square, odd side, unit sum

    @property
    def side(self) -> int:
        return self.grid.shape[0]


def disk(cx: float, cy: float, r: float, side: int) -> np.ndarray:
    """Binary mask of the disk of radius |r| centered at (cx, cy).

    Coordinates are grid-centered: cell (x, y) with x = col - side//2,
    y = row - side//2 is set iff (x-cx)^2 + (y-cy)^2 <= r^2.  r = 0 marks
    only the center cell.  The disk must fit inside the grid.
    """
    if side < 1 or side % 2 == 0:
        raise ValueError(f"side must be odd and positive, got {side}")
    half = side // 2
    if max(abs(cx), abs(cy)) + abs(r) > half + 1e-12 and side > 1:
        raise ValueError(
            f"disk of radius {abs(r)} at ({cx}, {cy}) does not fit in side {side}"
        )
    if side == 1 and (abs(cx) > 1e-12 or abs(cy) > 1e-12 or abs(r) >= 1):
        raise ValueError(f"disk of radius {abs(r)} at ({cx}, {cy}) does not fit in side 1")
    coords = np.arange(side, dtype=np.float64) - half
    xx = coords[np.newaxis, :] - cx
    yy = coords[:, np.newaxis] - cy
    return (xx * xx + yy * yy <= r * r + 0.0).astype(np.float64)


def right_psf(r: float) -> PsfKernel:
    """Right-view DP kernel for signed pixel radius r, unit-sum normalized.

    Built as sum_k C(0,0;r) * C(k*sign(r),0;r) over k = 0..floor(|2r|).
    The support lies inside the centered disk, so the returned grid has side
    2*floor(|r|)+1.  |r| < 1 collapses to the delta kernel.
    """
    if not math.isfinite(r):
        raise ValueError(f"radius must be finite, got {r}")
    mag = abs(r)
    n_shift = int(math.floor(2.0 * mag))
    sgn = 1.0 if r > 0 else -1.0
    # Working grid large enough for every shifted disk; the product lives
    # inside the centered disk, so we crop back to the tight support after.
    big_half = int(math.ceil(mag)) + n_shift
    big_side = 2 * big_half + 1
    center = disk(0.0, 0.0, r, big_side)
    acc = np.zeros_like(center)
    for k in range(n_shift + 1):
        acc += center * disk(k * sgn, 0.0, r, big_side)
    half = int(math.floor(mag))
    lo, hi = big_half - half, big_half + half + 1
    tight = acc[lo:hi, lo:hi]
    return PsfKernel(radius_px=float(r), grid=tight / tight.sum())


def flip_h(kernel: PsfKernel) -> PsfKernel:
    """Horizontal mirror of a kernel; the radius parameter flips sign."""
    return PsfKernel(radius_px=-kernel.radius_px, grid=kernel.grid[:, ::-1].copy())


def convolve(patch: np.ndarray, kernel: PsfKernel) -> np.ndarray:
    """2-D convolution cropped to the valid interior (no boundary padding)."""
    grid = kernel.grid
    if grid.shape[0] > patch.shape[0] or grid.shape[1] > patch.shape[1]:
        raise ValueError(
            f"kernel side {grid.shape[0]} exceeds patch shape {patch.shape}"
        )
    return scipy.signal.convolve(patch, grid, mode="valid")


def normalize_l1(patch: np.ndarray) -> np.ndarray:
    """Divide a patch by its element-wise L1 norm."""
    norm = np.abs(patch).sum()
    if norm <= 0 or not np.isfinite(norm):
        raise DegeneratePatchError(f"patch L1 norm is {norm}; cannot normalize")
    return patch / norm


def embed_kernel(kernel: PsfKernel, side: int) -> np.ndarray:
    """Center a kernel grid inside a larger odd-sided zero grid."""
    sk = kernel.side
    if side < sk or side % 2 == 0:
        raise ValueError(f"target side {side} cannot hold kernel side {sk}")
    out = np.zeros((side, side), dtype=np.float64)
    off = (side - sk) // 2
    out[off : off + sk, off : off + sk] = kernel.grid
    return out


class PairConvolver:
    """FFT plan for convolving one fixed DP patch pair against many kernels.

    All kernels are embedded into a common odd side before transforming, so
    every result shares one valid region and losses stay comparable across
    candidates.  The forward transforms of the two patches are computed once.
    """

    def __init__(self, g_l: np.ndarray, g_r: np.ndarray, kernel_side: int):
        if g_l.shape != g_r.shape:
            raise ValueError(f"patch shapes differ: {g_l.shape} vs {g_r.shape}")
        if kernel_side % 2 == 0:
            raise ValueError(f"kernel side must be odd, got {kernel_side}")
        if kernel_side > min(g_l.shape):
            raise ValueError(
                f"kernel side {kernel_side} exceeds patch shape {g_l.shape}"
            )
        self.kernel_side = kernel_side
        self.patch_shape = g_l.shape
        full = (g_l.shape[0] + kernel_side - 1, g_l.shape[1] + kernel_side - 1)
        self._fshape = (scipy.fft.next_fast_len(full[0]), scipy.fft.next_fast_len(full[1]))
        self._valid = (
            slice(kernel_side - 1, g_l.shape[0]),
            slice(kernel_side - 1, g_l.shape[1]),
        )
        self.left_fft = scipy.fft.rfft2(g_l, self._fshape)
        self.right_fft = scipy.fft.rfft2(g_r, self._fshape)

    def _kernel_fft(self, kernel: PsfKernel) -> np.ndarray:
        return scipy.fft.rfft2(embed_kernel(kernel, self.kernel_side), self._fshape)

    def irfft_product(self, spectrum: np.ndarray) -> np.ndarray:
        """Back-transform a spectral product and crop to the valid region."""
        return scipy.fft.irfft2(spectrum, self._fshape)[self._valid]

    def cross_diff_norm(self, kernel: PsfKernel, kernel_fft=None, flip_fft=None) -> float:
        """Frobenius norm of G_l * H_r - G_r * H_l over the valid region."""
        fk = self._kernel_fft(kernel) if kernel_fft is None else kernel_fft
        fkf = self._kernel_fft(flip_h(kernel)) if flip_fft is None else flip_fft
        diff = self.irfft_product(self.left_fft * fk - self.right_fft * fkf)
        return float(np.linalg.norm(diff))

    def convolve_pair(self, kernel: PsfKernel, kernel_fft=None, flip_fft=None):
        """(G_l * H_r, G_r * H_l) over the shared valid region."""
        fk = self._kernel_fft(kernel) if kernel_fft is None else kernel_fft
        fkf = self._kernel_fft(flip_h(kernel)) if flip_fft is None else flip_fft
        left = self.irfft_product(self.left_fft * fk)
        right = self.irfft_product(self.right_fft * fkf)
        return left, right

    def kernel_ffts(self, kernel: PsfKernel):
        """Precompute the pair of transforms for reuse across patch pairs."""
        return self._kernel_fft(kernel), self._kernel_fft(flip_h(kernel))
