"""Pinhole camera geometry.

Conventions used throughout the package:

- Pixel centers sit at integer coordinates, u along columns in [0, W-1],
  v along rows in [0, H-1].
- The extrinsic pair (R, t) maps world points into the camera frame:
  p_cam = R @ p_world + t, with t expressed in the camera frame. The camera
  center in world coordinates is therefore -R.T @ t.
- The world y axis points downward; the ground plane is y = h with h > 0
  (the camera's mounting height when the camera sits at the world origin).
- Camera axes: x right, y down, z forward (optical axis).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import AngleRangeError, BehindCameraError
from .grids import ScalarGrid

ORTHONORMAL_TOL = 1e-9

# Augmentation limits, degrees. Beyond these the ground prior degrades
# (little ground left in view), so they are hard-checked unless forced.
MAX_PITCH_DEG = 5.0
MAX_ROLL_DEG = 5.0
MAX_YAW_DEG = 15.0


class PixelSample(NamedTuple):
    """A pixel location with an associated depth along the optical axis.

    Fields broadcast, so u, v, d may be scalars or same-shape arrays.
    """

    u: object
    v: object
    d: object


class Point3(NamedTuple):
    """A 3-D point; fields may be scalars or same-shape arrays."""

    x: object
    y: object
    z: object

    def as_array(self) -> np.ndarray:
        """Stack into an array of shape (..., 3)."""
        return np.stack(
            [np.asarray(self.x, dtype=np.float64),
             np.asarray(self.y, dtype=np.float64),
             np.asarray(self.z, dtype=np.float64)], axis=-1)


def _check_rotation(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    if err > ORTHONORMAL_TOL:
        raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
    det = float(np.linalg.det(R))
    if abs(det - 1.0) > ORTHONORMAL_TOL:
        raise ValueError(f"rotation must have determinant +1, got {det!r}")
    return R


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics, extrinsics and ground-plane height.

    Attributes:
        fx, fy: focal lengths in pixels (> 0).
        cx, cy: principal point in pixel coordinates.
        width, height: image size in pixels (>= 1).
        R: 3x3 world-to-camera rotation (orthonormal, det +1).
        t: camera-frame translation, p_cam = R @ p_world + t.
        h: ground-plane height, world plane y = h, h > 0.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    R: np.ndarray
    t: np.ndarray
    h: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be at least 1x1, got {self.width}x{self.height}")
        if not self.h > 0:
            raise ValueError(f"ground height h must be positive, got {self.h}")
        R = _check_rotation(self.R)
        t = np.asarray(self.t, dtype=np.float64).reshape(3).copy()
        R = np.ascontiguousarray(R)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "fx", float(self.fx))
        object.__setattr__(self, "fy", float(self.fy))
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "h", float(self.h))

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        # Analytic inverse; keeps rotate-by-zero homographies clean.
        return np.array([[1.0 / self.fx, 0.0, -self.cx / self.fx],
                         [0.0, 1.0 / self.fy, -self.cy / self.fy],
                         [0.0, 0.0, 1.0]])

    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R^T t."""
        return -self.R.T @ self.t

    def ray(self, u, v) -> Point3:
        """Camera-frame ray through pixel (u, v) at unit optical depth."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        return Point3((u - self.cx) / self.fx, (v - self.cy) / self.fy,
                      np.ones_like(u + v))

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "R": [float(x) for x in self.R.reshape(-1)],
            "t": [float(x) for x in self.t],
            "h": self.h,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        required = {"fx", "fy", "cx", "cy", "width", "height", "h"}
        missing = required - set(d)
        if missing:
            raise ValueError(f"camera config missing keys: {sorted(missing)}")
        R = np.asarray(d.get("R", np.eye(3).reshape(-1).tolist()),
                       dtype=np.float64).reshape(3, 3)
        t = np.asarray(d.get("t", [0.0, 0.0, 0.0]), dtype=np.float64)
        return cls(fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
                   width=d["width"], height=d["height"], R=R, t=t, h=d["h"])

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "CameraModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def unproject(cam: CameraModel, px: PixelSample) -> Point3:
    """Lift a pixel sample to a world point: R^T (K^{-1} d [u,v,1] - t).

    Depth must be positive (optical-axis depth, not ray length).
    """
    u = np.asarray(px.u, dtype=np.float64)
    v = np.asarray(px.v, dtype=np.float64)
    d = np.asarray(px.d, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("unproject requires positive depth")
    rx = (u - cam.cx) / cam.fx
    ry = (v - cam.cy) / cam.fy
    pcx = d * rx - cam.t[0]
    pcy = d * ry - cam.t[1]
    pcz = d - cam.t[2]
    Rt = cam.R.T
    return Point3(Rt[0, 0] * pcx + Rt[0, 1] * pcy + Rt[0, 2] * pcz,
                  Rt[1, 0] * pcx + Rt[1, 1] * pcy + Rt[1, 2] * pcz,
                  Rt[2, 0] * pcx + Rt[2, 1] * pcy + Rt[2, 2] * pcz)


def project(cam: CameraModel, p: Point3) -> tuple:
    """Project a world point to pixel coordinates (u, v).

    Raises BehindCameraError if any point has camera-axis depth <= 0.
    """
    x = np.asarray(p.x, dtype=np.float64)
    y = np.asarray(p.y, dtype=np.float64)
    z = np.asarray(p.z, dtype=np.float64)
    R, t = cam.R, cam.t
    cxx = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z + t[0]
    cyy = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z + t[1]
    czz = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z + t[2]
    if np.any(czz <= 0):
        raise BehindCameraError("point has non-positive camera-axis depth")
    return cam.fx * (cxx / czz) + cam.cx, cam.fy * (cyy / czz) + cam.cy


def euler_matrix(pitch: float, roll: float, yaw: float) -> np.ndarray:
    """Rotation applied to camera-frame coordinates for a camera turned by
    the given angles (degrees), intrinsic order yaw -> pitch -> roll.

    Signs: negative pitch tilts the camera toward the ground (raises the
    horizon in the image), positive yaw pans right, positive roll dips the
    camera's right side. Composition for passive (coordinate) transforms
    left-multiplies successive intrinsic rotations:
        R_aug = Rz(-roll) @ Rx(-pitch) @ Ry(-yaw)
    """
    p = math.radians(pitch)
    r = math.radians(roll)
    y = math.radians(yaw)
    cp, sp = math.cos(-p), math.sin(-p)
    cr, sr = math.cos(-r), math.sin(-r)
    cy_, sy = math.cos(-y), math.sin(-y)
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    Ry = np.array([[cy_, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy_]])
    Rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return Rz @ Rx @ Ry


def compose_rotation(cam: CameraModel, pitch: float = 0.0, roll: float = 0.0,
                     yaw: float = 0.0, force: bool = False) -> CameraModel:
    """Camera with rotation R_aug @ R; intrinsics, t and h unchanged.

    Angles are degrees and are limited to |pitch| <= 5, |roll| <= 5,
    |yaw| <= 15 unless force=True.
    """
    if not force:
        if abs(pitch) > MAX_PITCH_DEG:
            raise AngleRangeError(f"|pitch| <= {MAX_PITCH_DEG} deg required, got {pitch}")
        if abs(roll) > MAX_ROLL_DEG:
            raise AngleRangeError(f"|roll| <= {MAX_ROLL_DEG} deg required, got {roll}")
        if abs(yaw) > MAX_YAW_DEG:
            raise AngleRangeError(f"|yaw| <= {MAX_YAW_DEG} deg required, got {yaw}")
    R_aug = euler_matrix(pitch, roll, yaw)
    return replace(cam, R=R_aug @ cam.R)


def project_points(cam: CameraModel, points: np.ndarray) -> ScalarGrid:
    """Project world points into a sparse depth grid with a z-buffer.

    points: array of shape (N, 3). Points behind the camera or landing off
    the image are dropped. Pixel assignment rounds to the nearest integer
    coordinate, ties toward the lower index. When several points land on the
    same pixel the smallest depth wins.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    pc = pts @ cam.R.T + cam.t
    z = pc[:, 2]
    front = z > 0
    u = cam.fx * (pc[front, 0] / z[front]) + cam.cx
    v = cam.fy * (pc[front, 1] / z[front]) + cam.cy
    zf = z[front]
    # nearest integer, exact .5 ties toward the lower index
    iu = np.ceil(u - 0.5).astype(np.int64)
    iv = np.ceil(v - 0.5).astype(np.int64)
    inside = (iu >= 0) & (iu < cam.width) & (iv >= 0) & (iv < cam.height)
    depth = np.full((cam.height, cam.width), np.inf)
    np.minimum.at(depth, (iv[inside], iu[inside]), zf[inside])
    valid = np.isfinite(depth)
    return ScalarGrid(np.where(valid, depth, 0.0), valid)
