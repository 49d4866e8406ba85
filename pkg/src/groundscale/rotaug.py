"""Rotation augmentation for training views.

A camera rotated in place sees the same scene through a different grid of
rays. Three consumers need consistent treatment:

- the color image resamples through a homography (no depth needed),
- the analytic ground prior is simply recomputed for the rotated camera,
- sparse depth samples reproject point-by-point with a z-buffer.

Angles are degrees and share one convention (see camgeo.euler_matrix):
negative pitch tilts the camera toward the ground, positive yaw pans right,
positive roll dips the right side. Limits |pitch|, |roll| <= 5 and
|yaw| <= 15 apply everywhere unless force=True.
"""

from __future__ import annotations

import numpy as np

from .camgeo import (CameraModel, PixelSample, compose_rotation, euler_matrix,
                     project_points, unproject)
from .grids import ScalarGrid, pixel_grid
from .groundprior import DEFAULT_MAX_DEPTH, GroundPrior, ground_depth
from .viewsynth import bilinear_sample


def rotate_image(image: np.ndarray, cam: CameraModel, pitch: float = 0.0,
                 roll: float = 0.0, yaw: float = 0.0,
                 force: bool = False) -> ScalarGrid:
    """Resample an image as a camera rotated in place would see it.

    Each destination pixel's ray, expressed in the source camera frame via
    the transpose of the augmentation rotation, is projected back onto the
    source image and sampled bilinearly. Pixels whose back-rotated ray
    points backward or lands outside the source image are invalid (value 0).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.shape != (cam.height, cam.width):
        raise ValueError(
            f"image shape {img.shape} does not match camera "
            f"({cam.height}, {cam.width})")
    # runs the same angle-limit checks used everywhere else
    compose_rotation(cam, pitch, roll, yaw, force=force)
    R_aug = euler_matrix(pitch, roll, yaw)

    uu, vv = pixel_grid(cam.height, cam.width)
    rx = (uu - cam.cx) / cam.fx
    ry = (vv - cam.cy) / cam.fy
    Rt = R_aug.T
    sx = Rt[0, 0] * rx + Rt[0, 1] * ry + Rt[0, 2]
    sy = Rt[1, 0] * rx + Rt[1, 1] * ry + Rt[1, 2]
    sz = Rt[2, 0] * rx + Rt[2, 1] * ry + Rt[2, 2]

    front = sz > 0
    szc = np.where(front, sz, 1.0)
    us = cam.fx * (sx / szc) + cam.cx
    vs = cam.fy * (sy / szc) + cam.cy
    us = np.where(front, us, -1.0)
    vs = np.where(front, vs, -1.0)

    sample = bilinear_sample(img, us, vs)
    valid = sample.valid & front
    return ScalarGrid(np.where(valid, sample.values, 0.0), valid)


def augment_ground(cam: CameraModel, pitch: float = 0.0, roll: float = 0.0,
                   yaw: float = 0.0, max_depth: float = DEFAULT_MAX_DEPTH,
                   force: bool = False) -> GroundPrior:
    """Ground prior as seen by the rotated camera.

    The prior is analytic, so no resampling is involved: this is exactly
    ground_depth(compose_rotation(cam, ...)).
    """
    return ground_depth(compose_rotation(cam, pitch, roll, yaw, force=force),
                        max_depth=max_depth)


def augment_sparse_depth(cam: CameraModel, samples, pitch: float = 0.0,
                         roll: float = 0.0, yaw: float = 0.0,
                         force: bool = False) -> ScalarGrid:
    """Reproject sparse depth into the rotated camera's pixel grid.

    samples may be a ScalarGrid of per-pixel depths in the unrotated view
    (invalid entries skipped) or an (N, 3) array of world points. Either way
    the points are projected with a z-buffer: where several land on one
    pixel, the nearest survives. Unlike the image path this needs no
    interpolation, so depth values pass through unchanged up to the
    projection arithmetic.
    """
    rotated = compose_rotation(cam, pitch, roll, yaw, force=force)
    if isinstance(samples, ScalarGrid):
        if samples.shape != (cam.height, cam.width):
            raise ValueError(
                f"depth grid shape {samples.shape} does not match camera "
                f"({cam.height}, {cam.width})")
        vv, uu = np.nonzero(samples.valid)
        if vv.size == 0:
            return ScalarGrid(np.zeros((cam.height, cam.width)),
                              np.zeros((cam.height, cam.width), dtype=bool))
        d = samples.values[samples.valid]
        pts = unproject(cam, PixelSample(uu.astype(np.float64),
                                         vv.astype(np.float64), d)).as_array()
    else:
        pts = np.asarray(samples, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected world points of shape (N, 3), got {pts.shape}")
    return project_points(rotated, pts)
