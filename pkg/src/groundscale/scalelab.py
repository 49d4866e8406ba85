"""Synthetic scale-recovery laboratory.

A desk-scale end-to-end check of the whole mechanism: render a two-view
scene with known geometry (textured ground plane plus a few boxes), start a
per-pixel depth field and the pose translation at a deliberately wrong
common scale k0, and optimize the full loss. The photometric terms alone
cannot tell k0 from 1 (joint rescaling of depth and translation reproduces
the images); the ground prior is fixed in meters, so the prior-consistency
term breaks the tie and the optimum returns to metric scale. The ablation
with that term switched off documents the ambiguity staying unresolved.

Everything here is deterministic: the texture is a hash-based value noise
(no RNG state), rendering is a pure function of ray coordinates, and the
optimizer is plain momentum descent on globally normalized gradients with a
monotonicity safeguard (steps that raise the loss are rejected, momentum is
reset and the step size halves). Thread counts change wall time only, never
results.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .camgeo import CameraModel
from .depthmetrics import MetricReport, evaluate
from .errors import DegenerateBatchError, OptimizationFailure
from .fusion import (AttentionMap, DepthField, attention_activation,
                     attention_activation_grad, fuse)
from .grids import ScalarGrid, pixel_grid
from .groundprior import compute_tau, ground_depth, plane_depth_raw
from .losses import LossWeights, total_loss
from .viewsynth import RigidPose, moved_camera

# Width (meters) of the assumed flat corridor for the reference scene's
# attention budget; gives tau = 0.3 at the reference geometry.
REFERENCE_PATHWAY_WIDTH = 2.4

# Depth assigned to sky pixels when a full positive field is needed.
SKY_FILL_DEPTH = 60.0

# Attention logits for runs that must keep the prior blend numerically
# inert (ablations, invariance sweeps): sigmoid(-40) ~ 4e-18.
ABLATION_ATTENTION_LOGITS = -40.0

# Step length for the ablation run; see ablate() for why it is smaller
# than the recovery default.
ABLATION_LR = 1e-2


# --------------------------------------------------------------------------
# procedural ground texture


_H1 = np.uint64(0x9E3779B97F4A7C15)
_H2 = np.uint64(0xBF58476D1CE4E5B9)
_H3 = np.uint64(0x94D049BB133111EB)


def _mix64(h: np.ndarray) -> np.ndarray:
    h = (h ^ (h >> np.uint64(30))) * _H2
    h = (h ^ (h >> np.uint64(27))) * _H3
    return h ^ (h >> np.uint64(31))


def _lattice01(ix: np.ndarray, iz: np.ndarray, seed: int) -> np.ndarray:
    """Hash integer lattice coordinates to floats in [0, 1). Stateless."""
    key = (ix.astype(np.int64).astype(np.uint64) * _H1
           ^ iz.astype(np.int64).astype(np.uint64) * _H2
           ^ np.asarray(seed, dtype=np.uint64) * _H3)
    return _mix64(key).astype(np.float64) / float(2 ** 64)


def _smootherstep(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def value_noise(x: np.ndarray, z: np.ndarray, seed: int) -> np.ndarray:
    """Smooth deterministic noise in [0, 1) over the (x, z) plane."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x0 = np.floor(x)
    z0 = np.floor(z)
    tx = _smootherstep(x - x0)
    tz = _smootherstep(z - z0)
    h00 = _lattice01(x0, z0, seed)
    h10 = _lattice01(x0 + 1.0, z0, seed)
    h01 = _lattice01(x0, z0 + 1.0, seed)
    h11 = _lattice01(x0 + 1.0, z0 + 1.0, seed)
    top = h00 + (h10 - h00) * tx
    bot = h01 + (h11 - h01) * tx
    return top + (bot - top) * tz


@dataclass(frozen=True)
class TextureSpec:
    """Multi-octave value-noise albedo for the ground plane.

    Octave k samples the noise at spatial period `period / 2^k` with weight
    `0.5^k`; the centered sum is scaled by `amplitude` around `base` and
    clipped to [0.05, 0.95]. The photometric loss needs this texture: a flat
    ground would leave depth unconstrained along rows.

    The amplitude fades smoothly to zero between world radii fade_start and
    fade_end. Distant ground compresses to well under a pixel per noise
    period, where any fixed pattern aliases differently in the two views;
    fading it out keeps the rendered pair photometrically consistent at the
    true depth while the near field keeps full contrast.
    """

    seed: int = 0
    octaves: int = 3
    period: float = 3.0
    base: float = 0.5
    amplitude: float = 0.35
    fade_start: float = 8.0
    fade_end: float = 14.0

    def __post_init__(self):
        if self.octaves < 1:
            raise ValueError(f"octaves must be >= 1, got {self.octaves}")
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if not 0.0 < self.fade_start < self.fade_end:
            raise ValueError("need 0 < fade_start < fade_end, got "
                             f"{self.fade_start}, {self.fade_end}")

    def albedo(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        total = 0.0
        for k in range(self.octaves):
            f = 2.0 ** k / self.period
            total = total + 0.5 ** k * (value_noise(x * f, z * f, self.seed + k) - 0.5)
        r = np.sqrt(x * x + z * z)
        t = np.clip((r - self.fade_start) / (self.fade_end - self.fade_start),
                    0.0, 1.0)
        envelope = 1.0 - _smootherstep(t)
        return np.clip(self.base + self.amplitude * envelope * total, 0.05, 0.95)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "octaves": self.octaves, "period": self.period,
                "base": self.base, "amplitude": self.amplitude,
                "fade_start": self.fade_start, "fade_end": self.fade_end}

    @classmethod
    def from_dict(cls, d: dict) -> "TextureSpec":
        return cls(seed=int(d["seed"]), octaves=int(d["octaves"]),
                   period=float(d["period"]), base=float(d["base"]),
                   amplitude=float(d["amplitude"]),
                   fade_start=float(d["fade_start"]),
                   fade_end=float(d["fade_end"]))


# --------------------------------------------------------------------------
# scene description


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: center and full extents in meters, flat albedo."""

    center: tuple
    size: tuple
    albedo: float

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        size = tuple(float(s) for s in self.size)
        if len(center) != 3 or len(size) != 3:
            raise ValueError("box center and size must be 3-vectors")
        if any(s <= 0 for s in size):
            raise ValueError(f"box extents must be positive, got {size}")
        if not 0.0 <= self.albedo <= 1.0:
            raise ValueError(f"albedo must lie in [0, 1], got {self.albedo}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.center) - 0.5 * np.array(self.size)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.center) + 0.5 * np.array(self.size)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "size": list(self.size),
                "albedo": self.albedo}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(center=tuple(d["center"]), size=tuple(d["size"]),
                   albedo=float(d["albedo"]))


@dataclass(frozen=True)
class SceneSpec:
    """A synthetic world: textured ground plane (y = camera h), boxes,
    constant-albedo shading, and the true relative pose between two views.

    The camera height and the plane are consistent by construction: the
    renderer places the plane at y = camera.h, the same plane the ground
    prior assumes. The baseline translation must be nonzero (a static pair
    constrains nothing).
    """

    camera: CameraModel
    baseline: RigidPose
    boxes: tuple = ()
    texture: TextureSpec = TextureSpec()
    background: float = 0.35
    supersample: int = 4

    def __post_init__(self):
        if not np.any(self.baseline.t != 0.0):
            raise ValueError("baseline translation must be nonzero")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError(f"background must lie in [0, 1], got {self.background}")
        if int(self.supersample) < 1:
            raise ValueError(f"supersample must be >= 1, got {self.supersample}")
        object.__setattr__(self, "supersample", int(self.supersample))
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def to_dict(self) -> dict:
        return {
            "camera": self.camera.to_dict(),
            "baseline": {"R": self.baseline.R.tolist(),
                         "t": self.baseline.t.tolist()},
            "boxes": [b.to_dict() for b in self.boxes],
            "texture": self.texture.to_dict(),
            "background": self.background,
            "supersample": self.supersample,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(camera=CameraModel.from_dict(d["camera"]),
                   baseline=RigidPose(np.array(d["baseline"]["R"], dtype=np.float64),
                                      np.array(d["baseline"]["t"], dtype=np.float64)),
                   boxes=tuple(Box.from_dict(b) for b in d["boxes"]),
                   texture=TextureSpec.from_dict(d["texture"]),
                   background=float(d["background"]),
                   supersample=int(d["supersample"]))

    def save(self, path: str):
        tmp = tempfile.NamedTemporaryFile(
            "w", dir=os.path.dirname(os.path.abspath(path)) or ".",
            suffix=".tmp", delete=False)
        try:
            json.dump(self.to_dict(), tmp, indent=2)
            tmp.write("\n")
            tmp.close()
            os.replace(tmp.name, path)
        except BaseException:
            tmp.close()
            os.unlink(tmp.name)
            raise

    @classmethod
    def load(cls, path: str) -> "SceneSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def reference_scene(seed: int = 0) -> SceneSpec:
    """The standard 128x96 test scene: forward-looking camera 1.5 m above a
    textured plane, two boxes resting on the ground, 1 m forward baseline."""
    cam = CameraModel(fx=110.0, fy=110.0, cx=63.5, cy=47.5,
                      width=128, height=96,
                      R=np.eye(3), t=np.zeros(3), h=1.5)
    baseline = RigidPose(np.eye(3), np.array([0.0, 0.0, -1.0]))
    boxes = (Box(center=(-1.2, 1.15, 6.0), size=(0.7, 0.7, 0.7), albedo=0.75),
             Box(center=(1.4, 1.25, 9.0), size=(0.5, 0.5, 0.5), albedo=0.3))
    return SceneSpec(camera=cam, baseline=baseline, boxes=boxes,
                     texture=TextureSpec(seed=seed), background=0.35,
                     supersample=4)


def reference_tau(spec: SceneSpec,
                  pathway_width: float = REFERENCE_PATHWAY_WIDTH) -> float:
    """Attention budget for a scene, from the corridor-width rule."""
    return compute_tau(pathway_width, spec.camera.height, spec.camera.width,
                       spec.camera.h)


# --------------------------------------------------------------------------
# rendering


@dataclass(frozen=True)
class RenderResult:
    """image: H x W in [0, 1]; depth: center-ray ground truth (sky invalid);
    ground_mask: pixels whose nearest center-ray hit is the flat ground."""

    image: np.ndarray
    depth: ScalarGrid
    ground_mask: np.ndarray


def _slab_interval(o: float, d: np.ndarray, lo: float, hi: float):
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - o) / d
        t1 = (hi - o) / d
    near = np.minimum(t0, t1)
    far = np.maximum(t0, t1)
    parallel = d == 0.0
    inside = lo <= o <= hi
    near = np.where(parallel, -np.inf if inside else np.inf, near)
    far = np.where(parallel, np.inf if inside else -np.inf, far)
    return near, far


def _box_hits(cam: CameraModel, rx: np.ndarray, ry: np.ndarray, boxes):
    """Nearest box intersection along each ray: (depth, albedo, hit)."""
    o = cam.center()
    Rt = cam.R.T
    dirs = (Rt[:, 0:1, None] * rx[None] + Rt[:, 1:2, None] * ry[None]
            + Rt[:, 2:3, None])
    best_t = np.full(rx.shape, np.inf)
    best_a = np.zeros(rx.shape)
    for box in boxes:
        lo, hi = box.lo, box.hi
        near = np.full(rx.shape, -np.inf)
        far = np.full(rx.shape, np.inf)
        for ax in range(3):
            n, f = _slab_interval(float(o[ax]), dirs[ax], float(lo[ax]), float(hi[ax]))
            near = np.maximum(near, n)
            far = np.minimum(far, f)
        hit = (near <= far) & (near > 0.0)
        closer = hit & (near < best_t)
        best_t = np.where(closer, near, best_t)
        best_a = np.where(closer, box.albedo, best_a)
    return best_t, best_a


def _shade(spec: SceneSpec, cam: CameraModel, rx: np.ndarray,
           ry: np.ndarray) -> np.ndarray:
    """Color along rays: ground texture, box albedo, or background."""
    plane_d, plane_ok = plane_depth_raw(cam, rx, ry)
    box_t, box_a = _box_hits(cam, rx, ry, spec.boxes)
    plane_t = np.where(plane_ok, plane_d, np.inf)
    box_hit = box_t < plane_t
    ground_hit = plane_ok & ~box_hit

    o = cam.center()
    Rt = cam.R.T
    dx = Rt[0, 0] * rx + Rt[0, 1] * ry + Rt[0, 2]
    dz = Rt[2, 0] * rx + Rt[2, 1] * ry + Rt[2, 2]
    pd = np.where(ground_hit, plane_d, 1.0)  # keep texture coords finite
    gx = o[0] + pd * dx
    gz = o[2] + pd * dz
    ground_color = spec.texture.albedo(gx, gz)

    return np.where(box_hit, box_a,
                    np.where(ground_hit, ground_color, spec.background))


def render(spec: SceneSpec, view: RigidPose = None, threads: int = 1) -> RenderResult:
    """Render the scene from the camera moved by `view`.

    The image is averaged over supersample^2 sub-rays per pixel (the views
    of a real pair are band-limited by optics; without this the warped
    texture cannot match at interpolated positions). Ground-truth depth uses
    the exact center ray so plane pixels reproduce the analytic ground prior
    bit for bit; sky pixels are invalid and take the background intensity.
    """
    if view is None:
        view = RigidPose.identity()
    cam = moved_camera(spec.camera, view)
    h, w = cam.height, cam.width

    # center rays: depth, masks
    u, v = pixel_grid(h, w)
    rx = (u - cam.cx) / cam.fx
    ry = (v - cam.cy) / cam.fy
    plane_d, plane_ok = plane_depth_raw(cam, rx, ry)
    box_t = _box_hits(cam, rx, ry, spec.boxes)[0]
    plane_t = np.where(plane_ok, plane_d, np.inf)
    box_hit = box_t < plane_t
    ground_mask = plane_ok & ~box_hit
    depth_vals = np.where(box_hit, box_t, np.where(ground_mask, plane_d, 0.0))
    valid = box_hit | ground_mask
    depth = ScalarGrid(np.where(valid, depth_vals, 0.0), valid)

    # supersampled image
    ss = spec.supersample
    offs = (np.arange(ss, dtype=np.float64) + 0.5) / ss - 0.5
    us = (np.arange(w, dtype=np.float64)[:, None] + offs[None, :]).reshape(-1)
    vs = (np.arange(h, dtype=np.float64)[:, None] + offs[None, :]).reshape(-1)
    rxs = (us - cam.cx) / cam.fx
    rys = (vs - cam.cy) / cam.fy

    def rows(lo: int, hi: int) -> np.ndarray:
        rxx = np.broadcast_to(rxs[None, :], (hi - lo, rxs.size))
        ryy = np.broadcast_to(rys[lo:hi, None], (hi - lo, rxs.size))
        return _shade(spec, cam, rxx, ryy)

    n_rows = h * ss
    if threads <= 1:
        img_ss = rows(0, n_rows)
    else:
        chunk = max(1, -(-n_rows // threads))
        bounds = [(i, min(i + chunk, n_rows)) for i in range(0, n_rows, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda b: rows(*b), bounds))
        img_ss = np.vstack(parts)
    image = img_ss.reshape(h, ss, w, ss).mean(axis=(1, 3))
    return RenderResult(image=image, depth=depth, ground_mask=ground_mask)


# --------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class OptimConfig:
    """Constants of the scale-recovery optimizer.

    Fixed-step momentum descent on the globally L2-normalized gradient of
    the full parameter vector (log-depth, attention logits, log pose
    scale); every step has length `lr` in that normalized metric. The
    auto-masked reprojection term is discontinuous wherever a pixel enters
    or leaves the mask, so a strictly monotone accept/reject scheme wedges
    against those jumps; instead the iterate walks freely and a best-so-far
    safeguard keeps the result: the recorded history is the running minimum
    and the returned state is the best point visited. A non-finite step
    reverts to that best point and halves lr; NaN loss aborts the run.

    The defaults are sized for the reference scene: the log-depth block
    alone must travel tens of units of L2 distance, and the attention mean
    approaches its budget floor only asymptotically (the hinge force decays
    linearly as the boundary nears), so the step count carries the cost.
    """

    steps: int = 20000
    lr: float = 1e-1
    momentum: float = 0.95
    attention_logits_init: float = 0.0

    def to_dict(self) -> dict:
        return {"steps": self.steps, "lr": self.lr, "momentum": self.momentum,
                "attention_logits_init": self.attention_logits_init}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        extra = set(d) - set(known)
        if extra:
            raise ValueError(f"unknown optimizer settings: {sorted(extra)}")
        return cls(**known)


@dataclass
class OptimState:
    """Optimization variables plus bookkeeping.

    Depth is kept in log space so positivity never needs a projection; the
    pose scale multiplies the known baseline translation and is likewise
    optimized as a log. The fields hold the best point visited; history is
    the running best loss, non-increasing by construction.
    """

    log_depth: np.ndarray
    attention_logits: np.ndarray
    log_pose_scale: float
    step: int
    history: list

    @property
    def pose_scale(self) -> float:
        return math.exp(self.log_pose_scale)


@dataclass(frozen=True)
class SegmentationReport:
    """Attention binarized at `threshold` against the true flat-ground mask.

    An all-below-threshold prediction has undefined precision; it is
    reported as 1.0 with empty_prediction set."""

    precision: float
    recall: float
    empty_prediction: bool
    threshold: float = 0.5

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "empty_prediction": self.empty_prediction,
                "threshold": self.threshold}


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of a scale-recovery run."""

    pose_scale: float
    k0: float
    tau: float
    final_loss: float
    breakdown: dict
    metrics: MetricReport
    mean_attention: float
    segmentation: SegmentationReport
    depth: DepthField
    fused: DepthField
    attention: AttentionMap
    state: OptimState
    weights: LossWeights
    config: OptimConfig
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "k0": self.k0,
            "tau": self.tau,
            "pose_scale": self.pose_scale,
            "final_loss": self.final_loss,
            "breakdown": dict(self.breakdown),
            "metrics": self.metrics.to_dict(),
            "attention": {"mean": self.mean_attention,
                          **self.segmentation.to_dict()},
            "weights": {"smooth": self.weights.smooth,
                        "const": self.weights.const,
                        "reg": self.weights.reg},
            "config": self.config.to_dict(),
            "steps_run": self.state.step,
            "loss_curve": [float(x) for x in self.state.history],
        }


def attention_segmentation_report(alpha: AttentionMap, reference,
                                  threshold: float = 0.5) -> SegmentationReport:
    """Precision/recall of thresholded attention against true flat ground.

    `reference` is a SceneSpec (the mask comes from a fresh render) or a
    boolean mask array.
    """
    if isinstance(reference, SceneSpec):
        mask = render(reference).ground_mask
    else:
        mask = np.asarray(reference, dtype=bool)
    if mask.shape != alpha.shape:
        raise ValueError(f"mask shape {mask.shape} != attention {alpha.shape}")
    pred = alpha.values > threshold
    tp = int((pred & mask).sum())
    fp = int((pred & ~mask).sum())
    fn = int((~pred & mask).sum())
    empty = not bool(pred.any())
    precision = 1.0 if empty else tp / (tp + fp)
    recall = tp / (tp + fn) if (tp + fn) > 0 else 1.0
    return SegmentationReport(precision=precision, recall=recall,
                              empty_prediction=empty, threshold=threshold)


def _filled_gt(depth: ScalarGrid) -> np.ndarray:
    """True depth with sky pixels set to a fixed far value."""
    return np.where(depth.valid, depth.values, SKY_FILL_DEPTH)


def recover_scale(spec: SceneSpec, k0: float = 2.0, tau: float = None,
                  weights: LossWeights = LossWeights(),
                  config: OptimConfig = OptimConfig(),
                  threads: int = 1) -> RecoveryResult:
    """Optimize depth, attention and pose scale from a mis-scaled start.

    The depth field initializes to k0 times the rendered ground truth (sky
    filled at k0 * SKY_FILL_DEPTH) and the pose translation to k0 times the
    true baseline, a photometrically self-consistent but metrically wrong
    configuration. With the default weights the prior-consistency term pulls
    the ground pixels to metric depth and the reprojection term drags the
    pose scale along; the returned pose_scale is the recovered scale factor
    (1.0 is perfect).

    Raises OptimizationFailure (history attached) if the loss turns NaN.
    """
    if k0 <= 0:
        raise ValueError(f"k0 must be positive, got {k0}")
    if tau is None:
        tau = reference_tau(spec)
    target = render(spec, threads=threads)
    source = render(spec, spec.baseline, threads=threads)
    prior = ground_depth(spec.camera)

    log_depth = np.log(k0 * _filled_gt(target.depth))
    logits = np.full(target.depth.shape, float(config.attention_logits_init))
    log_s = math.log(k0)

    def evaluate_point(ld, lg, ls):
        d = np.exp(ld)
        if not np.all(np.isfinite(d)) or not np.all(d > 0):
            return math.inf, None, None, None, None
        d_hat = DepthField.full(d)
        alpha = attention_activation(lg, prior.valid)
        s = math.exp(ls)
        pose = spec.baseline.scaled(s)
        try:
            rep = total_loss(target.image, [source.image], [pose], spec.camera,
                             d_hat, alpha, prior, tau, weights)
        except DegenerateBatchError:
            return math.inf, None, None, None, None
        g_ld = rep.grad_depth * d
        g_lg = rep.grad_alpha * attention_activation_grad(lg, prior.valid)
        gp = rep.grad_pose[0]
        t = spec.baseline.t
        g_ls = (gp[3] * t[0] + gp[4] * t[1] + gp[5] * t[2]) * s
        return rep.value, g_ld, g_lg, g_ls, rep

    loss, g_ld, g_lg, g_ls, rep = evaluate_point(log_depth, logits, log_s)
    if not math.isfinite(loss):
        raise OptimizationFailure("loss not finite at initialization",
                                  history=[loss])
    best = (loss, log_depth.copy(), logits.copy(), log_s, rep)
    history = [loss]
    v_ld = np.zeros_like(log_depth)
    v_lg = np.zeros_like(logits)
    v_ls = 0.0
    lr = config.lr
    step = 0
    for step in range(1, config.steps + 1):
        gnorm = math.sqrt(float((g_ld * g_ld).sum()) + float((g_lg * g_lg).sum())
                          + g_ls * g_ls)
        if gnorm == 0.0:
            break
        v_ld = config.momentum * v_ld + g_ld / gnorm
        v_lg = config.momentum * v_lg + g_lg / gnorm
        v_ls = config.momentum * v_ls + g_ls / gnorm
        log_depth = log_depth - lr * v_ld
        logits = logits - lr * v_lg
        log_s = log_s - lr * v_ls
        loss, g_ld, g_lg, g_ls, rep = evaluate_point(log_depth, logits, log_s)
        if math.isnan(loss):
            raise OptimizationFailure(f"loss became NaN at step {step}",
                                      history=history + [loss])
        if math.isinf(loss):
            # divergence brake: back to the best point, settle down
            loss, log_depth, logits, log_s, rep = (
                best[0], best[1].copy(), best[2].copy(), best[3], best[4])
            _, g_ld, g_lg, g_ls, _ = evaluate_point(log_depth, logits, log_s)
            v_ld = np.zeros_like(v_ld)
            v_lg = np.zeros_like(v_lg)
            v_ls = 0.0
            lr *= 0.5
        elif loss < best[0]:
            best = (loss, log_depth.copy(), logits.copy(), log_s, rep)
        history.append(min(best[0], history[-1]))

    state = OptimState(log_depth=best[1], attention_logits=best[2],
                       log_pose_scale=best[3], step=step, history=history)
    rep = best[4]
    log_depth, logits, log_s = best[1], best[2], best[3]
    d_hat = DepthField.full(np.exp(log_depth))
    alpha = attention_activation(logits, prior.valid)
    fused = fuse(d_hat, prior, alpha)
    metrics = evaluate(ScalarGrid.full(fused.values), target.depth)
    seg = attention_segmentation_report(alpha, target.ground_mask)
    return RecoveryResult(
        pose_scale=state.pose_scale, k0=float(k0), tau=float(tau),
        final_loss=best[0], breakdown=dict(rep.breakdown),
        metrics=metrics, mean_attention=float(alpha.values.mean()),
        segmentation=seg, depth=d_hat, fused=fused, attention=alpha,
        state=state, weights=weights, config=config, seed=spec.texture.seed)


def ablate(spec: SceneSpec, k0: float = 2.0, tau: float = None,
           config: OptimConfig = None, smooth: float = 1e-2,
           threads: int = 1) -> RecoveryResult:
    """recover_scale with the prior-consistency and budget terms off.

    The attention logits initialize very negative so the blend passes the
    predicted depth through untouched; photometric terms alone then see the
    k0-scaled configuration as a solution and the pose scale stays near k0.

    Without the ground terms the objective is exactly flat along the joint
    depth-and-translation scale direction (smoothness acts on log-depth, so
    it is scale-invariant too), and the pose coordinate random-walks along
    that direction with amplitude proportional to lr. The default config
    therefore takes the recovery step length down to ABLATION_LR; pass an
    explicit config to override.
    """
    weights = LossWeights(smooth=smooth, const=0.0, reg=0.0)
    if config is None:
        config = OptimConfig(lr=ABLATION_LR)
    cfg = replace(config, attention_logits_init=ABLATION_ATTENTION_LOGITS)
    return recover_scale(spec, k0=k0, tau=tau, weights=weights, config=cfg,
                         threads=threads)


def scale_sweep(spec: SceneSpec, ks=(0.5, 1.0, 2.0), tau: float = None,
                weights: LossWeights = None,
                attention_logits: float = ABLATION_ATTENTION_LOGITS,
                threads: int = 1) -> dict:
    """Total loss at jointly scaled configurations (depth and translation
    both multiplied by k, evaluated without any optimization).

    With const = reg = 0 and inert attention the values are equal to within
    floating-point noise: the photometric terms cannot see k. With the full
    loss and mid-level attention the k = 1 entry is strictly smallest. The
    returned dict maps each k to the total loss.
    """
    if weights is None:
        weights = LossWeights(smooth=1e-2, const=0.0, reg=0.0)
    if tau is None:
        tau = reference_tau(spec)
    target = render(spec, threads=threads)
    source = render(spec, spec.baseline, threads=threads)
    prior = ground_depth(spec.camera)
    gt = _filled_gt(target.depth)
    logits = np.full(target.depth.shape, float(attention_logits))
    alpha = attention_activation(logits, prior.valid)
    out = {}
    for k in ks:
        if k <= 0:
            raise ValueError(f"scale factors must be positive, got {k}")
        d_hat = DepthField.full(k * gt)
        pose = spec.baseline.scaled(k)
        rep = total_loss(target.image, [source.image], [pose], spec.camera,
                         d_hat, alpha, prior, tau, weights)
        out[float(k)] = rep.value
    return out
