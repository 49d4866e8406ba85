"""Differentiable novel-view synthesis: backproject, move, project, sample.

warp() resamples a source image at the pixel locations where each target
pixel's backprojected point lands after a rigid motion. Everything needed
for analytic gradients rides along: per-pixel derivative of the warped
intensity with respect to the target depth and with respect to the six
motion parameters (so3 rotation perturbation, then translation).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .camgeo import CameraModel, _check_rotation
from .grids import pixel_grid

# Sample coordinates within this distance of an integer are snapped to it.
# Double rounding in the projective chain leaves mathematically-integral
# coordinates ~1 ulp off, which would turn exact pixel hits into blends;
# the snap is ~6 orders of magnitude below any meaningful displacement.
SNAP_EPS = 1e-9


@dataclass(frozen=True)
class RigidPose:
    """Rigid motion (R, t) between two captures: q = R @ p + t.

    warp() applies it to the backprojected world points of the target view;
    the moved points projected through the same camera give the source-view
    sample locations."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = _check_rotation(self.R)
        t = np.asarray(self.t, dtype=np.float64).reshape(3).copy()
        R = np.ascontiguousarray(R)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    def scaled(self, s: float) -> "RigidPose":
        """Same rotation, translation scaled by s."""
        return RigidPose(self.R, s * self.t)


def moved_camera(cam: CameraModel, pose: RigidPose) -> CameraModel:
    """The camera that observes world points moved by `pose` the way `cam`
    observes the originals: project(result, p) == project(cam, pose(p)).

    R' = R @ pose.R, t' = R @ pose.t + t. Rendering a scene with this camera
    produces exactly the view that warp(source, ..., pose, cam) resamples.
    """
    return replace(cam, R=cam.R @ pose.R, t=cam.R @ pose.t + cam.t)


@dataclass(frozen=True)
class BilinearResult:
    values: np.ndarray
    valid: np.ndarray
    du: np.ndarray
    dv: np.ndarray


def bilinear_sample(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> BilinearResult:
    """Bilinearly sample `image` at (u, v); pixel centers at integers.

    Samples outside [0, W-1] x [0, H-1] are invalid (value and derivatives
    zero). On integer coordinates the value is the exact pixel value and the
    derivative is taken from the upper cell (toward increasing coordinate).
    Coordinates within SNAP_EPS of an integer are treated as that integer.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    ru = np.round(u)
    rv = np.round(v)
    u = np.where(np.abs(u - ru) <= SNAP_EPS, ru, u)
    v = np.where(np.abs(v - rv) <= SNAP_EPS, rv, v)

    valid = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    valid &= np.isfinite(u) & np.isfinite(v)

    uc = np.where(valid, u, 0.0)
    vc = np.where(valid, v, 0.0)
    x0 = np.floor(uc).astype(np.int64)
    y0 = np.floor(vc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    a = uc - x0
    b = vc - y0

    i00 = image[y0, x0]
    i01 = image[y0, x1]
    i10 = image[y1, x0]
    i11 = image[y1, x1]

    top = (1.0 - a) * i00 + a * i01
    bot = (1.0 - a) * i10 + a * i11
    values = (1.0 - b) * top + b * bot
    du = (1.0 - b) * (i01 - i00) + b * (i11 - i10)
    dv = (1.0 - a) * (i10 - i00) + a * (i11 - i01)

    zero = np.zeros_like(values)
    return BilinearResult(values=np.where(valid, values, zero),
                          valid=valid,
                          du=np.where(valid, du, zero),
                          dv=np.where(valid, dv, zero))


@dataclass(frozen=True)
class WarpResult:
    """Warped intensities plus the pieces downstream gradients need.

    values/valid: the resampled source (0 where invalid).
    u, v, z: sample coordinates and camera-axis depth in the source frame.
    dval_ddepth: d(values)/d(target depth), per pixel.
    dval_dpose: d(values)/d(pose), per pixel, shape (H, W, 6); the first
        three entries are a left so3 perturbation of the pose rotation, the
        last three the translation.
    """

    values: np.ndarray
    valid: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    dval_ddepth: np.ndarray
    dval_dpose: np.ndarray


def warp(source: np.ndarray, depth: np.ndarray, pose: RigidPose,
         cam: CameraModel) -> WarpResult:
    """Warp `source` into the target view given target `depth` and motion.

    For each target pixel: lift to a world point with the target camera,
    move it by `pose` (world-frame motion for the camera extrinsics in use),
    project with the same camera, sample the source bilinearly. Pixels whose
    moved point has non-positive source depth, or whose sample lands off the
    source image, are invalid (value 0, gradients 0).
    """
    source = np.asarray(source, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    if np.any(depth <= 0):
        raise ValueError("warp requires positive depth everywhere")

    u0, v0 = pixel_grid(h, w)
    rx = (u0 - cam.cx) / cam.fx
    ry = (v0 - cam.cy) / cam.fy

    R, t = cam.R, cam.t
    # p_src = M @ (d * r) + m, with M = R R_p R^T and m = R t_p + t - M t.
    M = R @ pose.R @ R.T
    m = R @ pose.t + t - M @ t

    ax = M[0, 0] * rx + M[0, 1] * ry + M[0, 2]
    ay = M[1, 0] * rx + M[1, 1] * ry + M[1, 2]
    az = M[2, 0] * rx + M[2, 1] * ry + M[2, 2]

    px = depth * ax + m[0]
    py = depth * ay + m[1]
    pz = depth * az + m[2]

    front = pz > 0
    pzc = np.where(front, pz, 1.0)
    with np.errstate(invalid="ignore"):
        us = cam.fx * (px / pzc) + cam.cx
        vs = cam.fy * (py / pzc) + cam.cy
    us = np.where(front, us, -1.0)
    vs = np.where(front, vs, -1.0)

    sample = bilinear_sample(source, us, vs)
    valid = sample.valid & front

    # du/dX for X in {px, py, pz} via the quotient rule, then chain.
    inv_z = np.where(front, 1.0 / pzc, 0.0)
    du_dx = cam.fx * inv_z
    du_dz = -cam.fx * px * inv_z * inv_z
    dv_dy = cam.fy * inv_z
    dv_dz = -cam.fy * py * inv_z * inv_z

    def chain(dx, dy, dz):
        du = du_dx * dx + du_dz * dz
        dv = dv_dy * dy + dv_dz * dz
        return sample.du * du + sample.dv * dv

    dval_ddepth = np.where(valid, chain(ax, ay, az), 0.0)

    # Pose jacobian. Translation: p_src = ... + R @ t_p, so dp/dt_pk = R[:, k].
    # Rotation: perturb pose.R on the left by exp([w]x); with the world point
    # p_w and q = pose.R @ p_w, dq/dw_k = e_k x q, and dp_src/dw_k = R (e_k x q).
    pw = _world_points(cam, rx, ry, depth)
    qx = pose.R[0, 0] * pw[0] + pose.R[0, 1] * pw[1] + pose.R[0, 2] * pw[2]
    qy = pose.R[1, 0] * pw[0] + pose.R[1, 1] * pw[1] + pose.R[1, 2] * pw[2]
    qz = pose.R[2, 0] * pw[0] + pose.R[2, 1] * pw[1] + pose.R[2, 2] * pw[2]

    dval_dpose = np.empty((h, w, 6))
    crosses = ((np.zeros_like(qx), -qz, qy),
               (qz, np.zeros_like(qx), -qx),
               (-qy, qx, np.zeros_like(qx)))
    for k, (cxk, cyk, czk) in enumerate(crosses):
        dx = R[0, 0] * cxk + R[0, 1] * cyk + R[0, 2] * czk
        dy = R[1, 0] * cxk + R[1, 1] * cyk + R[1, 2] * czk
        dz = R[2, 0] * cxk + R[2, 1] * cyk + R[2, 2] * czk
        dval_dpose[:, :, k] = np.where(valid, chain(dx, dy, dz), 0.0)
    for k in range(3):
        dval_dpose[:, :, 3 + k] = np.where(
            valid, chain(R[0, k], R[1, k], R[2, k]), 0.0)

    return WarpResult(values=sample.values, valid=valid, u=us, v=vs, z=pz,
                      dval_ddepth=dval_ddepth, dval_dpose=dval_dpose)


def _world_points(cam: CameraModel, rx, ry, depth):
    """World coordinates of each pixel's backprojected point."""
    pcx = depth * rx - cam.t[0]
    pcy = depth * ry - cam.t[1]
    pcz = depth - cam.t[2]
    Rt = cam.R.T
    return (Rt[0, 0] * pcx + Rt[0, 1] * pcy + Rt[0, 2] * pcz,
            Rt[1, 0] * pcx + Rt[1, 1] * pcy + Rt[1, 2] * pcz,
            Rt[2, 0] * pcx + Rt[2, 1] * pcy + Rt[2, 2] * pcz)
