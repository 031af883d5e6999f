"""Container for one viewpoint's DP data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optics import CameraMeta


@dataclass
class DpView:
    """Left/right sub-aperture images plus the scale-ambiguous depth map.

    Images are float arrays, (H, W) mono or (H, W, 3) RGB, nominally in
    [0, 1].  The depth map is (H, W) in reconstruction units with NaN marking
    invalid pixels.
    """

    view_id: int
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    meta: CameraMeta
    scene: str = ""
    aperture_group: str = ""

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise ValueError(
                f"view {self.view_id}: left/right shapes differ "
                f"{self.left.shape} vs {self.right.shape}"
            )
        if self.depth.shape != self.left.shape[:2]:
            raise ValueError(
                f"view {self.view_id}: depth shape {self.depth.shape} does not "
                f"match images {self.left.shape[:2]}"
            )

    @property
    def is_color(self) -> bool:
        return self.left.ndim == 3

    def estimation_channel(self) -> tuple[np.ndarray, np.ndarray]:
        """Green channel for color views, the image itself for mono.

        Blur search runs on a single channel to sidestep channel-dependent
        lens artifacts; the refinement loss still sums over all channels.
        """
        if self.is_color:
            return self.left[:, :, 1], self.right[:, :, 1]
        return self.left, self.right

    def channels(self) -> list[tuple[np.ndarray, np.ndarray]]:
        if self.is_color:
            return [
                (self.left[:, :, c], self.right[:, :, c])
                for c in range(self.left.shape[2])
            ]
        return [(self.left, self.right)]
