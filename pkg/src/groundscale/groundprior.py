"""Closed-form ground-plane depth prior and the attention budget rule.

The prior assigns each pixel the depth at which its camera ray meets the
ground plane y = h. With the ray r = ((u-cx)/fx, (v-cy)/fy, 1) and the
world-to-camera extrinsics (R, t), requiring world y = h gives

    d(u, v) = (h + (R^T t)_y) / (R_12 rx + R_22 ry + R_32)

where R_i2 is the second column of R. The numerator reduces to h when the
camera sits at the world origin (t = 0) and is what the unprojection
round-trip demands for arbitrary t: every valid pixel lifted with this depth
lands back on y = h. Only positive depths are kept; pixels at or above the
horizon (denominator ~ 0 or negative result) are invalid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .camgeo import CameraModel
from .errors import ConfigurationError
from .grids import ScalarGrid, pixel_grid

# |denominator| at or below this is treated as the horizon (invalid).
HORIZON_EPS = 1e-12

# Depth used to normalize priors into [0, 1]; the usual evaluation cap.
DEFAULT_MAX_DEPTH = 80.0


@dataclass(frozen=True)
class GroundPrior:
    """Ground-plane depth prior for one camera.

    Attributes:
        depth: prior depth with validity (positive, below-horizon pixels).
        normalized: depth / max_depth clamped to [0, 1], 0 on invalid pixels.
        max_depth: the normalization constant used.
        degenerate: True when no pixel is valid (camera sees no ground).
    """

    depth: ScalarGrid
    normalized: ScalarGrid
    max_depth: float
    degenerate: bool

    @property
    def valid(self) -> np.ndarray:
        return self.depth.valid

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape


def plane_depth_raw(cam: CameraModel, rx: np.ndarray, ry: np.ndarray):
    """Ground-plane depth along rays with normalized coordinates (rx, ry).

    rx = (u - cx)/fx, ry = (v - cy)/fy. Returns (depth, valid) arrays; the
    renderer reuses this so its plane depths match ground_depth bitwise.
    """
    R, t = cam.R, cam.t
    numer = cam.h + (R[0, 1] * t[0] + R[1, 1] * t[1] + R[2, 1] * t[2])
    denom = R[0, 1] * rx + R[1, 1] * ry + R[2, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = numer / denom
    valid = (np.abs(denom) > HORIZON_EPS) & (depth > 0) & np.isfinite(depth)
    return depth, valid


def ground_depth(cam: CameraModel, max_depth: float = DEFAULT_MAX_DEPTH) -> GroundPrior:
    """Evaluate the ground-plane prior over the full pixel grid."""
    u, v = pixel_grid(cam.height, cam.width)
    rx = (u - cam.cx) / cam.fx
    ry = (v - cam.cy) / cam.fy
    depth, valid = plane_depth_raw(cam, rx, ry)
    degenerate = not bool(valid.any())
    if degenerate:
        warnings.warn("ground prior is empty: camera sees no ground plane",
                      RuntimeWarning, stacklevel=2)
    grid = ScalarGrid(np.where(valid, depth, 0.0), valid)
    return GroundPrior(depth=grid,
                       normalized=normalize_prior(grid, max_depth),
                       max_depth=float(max_depth),
                       degenerate=degenerate)


def normalize_prior(depth: ScalarGrid, max_depth: float) -> ScalarGrid:
    """Depth scaled by 1/max_depth and clamped to [0, 1]; invalid pixels 0."""
    if not max_depth > 0:
        raise ValueError(f"max_depth must be positive, got {max_depth}")
    scaled = np.clip(depth.values / max_depth, 0.0, 1.0)
    out = np.where(depth.valid, scaled, 0.0)
    return ScalarGrid(out, depth.valid)


def compute_tau(pathway_width: float, image_height: int, image_width: int,
                h: float) -> float:
    """Expected ground fraction of the image for a pathway of given width:

        tau = (P_w * H) / (4 * h * W)

    All inputs must be positive; tau must come out below 1 or the
    configuration is rejected.
    """
    if not (pathway_width > 0 and image_height > 0 and image_width > 0 and h > 0):
        raise ValueError("compute_tau requires positive arguments, got "
                         f"({pathway_width}, {image_height}, {image_width}, {h})")
    tau = (pathway_width * image_height) / (4.0 * h * image_width)
    if tau >= 1.0:
        raise ConfigurationError(
            f"tau = {tau!r} >= 1: pathway width {pathway_width} is not "
            f"compatible with image {image_width}x{image_height} at height {h}")
    return tau
