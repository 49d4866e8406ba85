"""Self-supervised loss terms and their analytic gradients.

Four terms, combined by total_loss:

- reprojection: photometric error (SSIM + L1 mix) between the target and
  each warped source, minimum over sources per pixel, auto-masked against
  the unwarped (identity) error, averaged over kept pixels;
- smoothness: edge-aware first differences of mean-normalized inverse depth;
- prior consistency: attention-weighted absolute gap between predicted depth
  and the ground prior (pre-fusion depth, all pixels averaged);
- attention budget: one-sided quadratic hinge pushing mean attention up to
  the expected ground fraction tau.

Every term returns a LossReport carrying the value and gradients with
respect to its own inputs; total_loss chains them through the fusion blend
so its gradients are with respect to the raw depth field and attention.
All reductions are plain numpy sums (pairwise), independent of any thread
or chunk configuration used elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camgeo import CameraModel
from .errors import DegenerateBatchError
from .fusion import AttentionMap, DepthField, fuse, fusion_partials
from .groundprior import GroundPrior
from .viewsynth import RigidPose, warp

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
SSIM_WEIGHT = 0.85
L1_WEIGHT = 0.15


@dataclass(frozen=True)
class LossWeights:
    """Weights of the smoothness, prior-consistency and budget terms
    relative to the reprojection term."""

    smooth: float = 1e-2
    const: float = 0.1
    reg: float = 0.1


@dataclass(frozen=True)
class LossReport:
    """A loss value with whatever gradients the term produces.

    grad_pose entries are 6-vectors: so3 rotation perturbation first, then
    translation, one per source. mask/kept describe the reprojection
    auto-mask when present. breakdown maps term names to their values.
    """

    value: float
    grad_depth: np.ndarray | None = None
    grad_alpha: np.ndarray | None = None
    grad_pose: list | None = None
    mask: np.ndarray | None = None
    kept: int | None = None
    breakdown: dict | None = field(default=None)


def _box3(x: np.ndarray) -> np.ndarray:
    """3x3 box mean with mirror padding (edge not duplicated)."""
    p = np.pad(x, 1, mode="reflect")
    rows = p[:-2, :] + p[1:-1, :] + p[2:, :]
    return (rows[:, :-2] + rows[:, 1:-1] + rows[:, 2:]) / 9.0


def _box3_adjoint(w: np.ndarray) -> np.ndarray:
    """Adjoint of _box3: <box3(x), w> == <x, box3_adjoint(w)>."""
    h, wd = w.shape
    zp = np.zeros((h + 2, wd + 2))
    for di in range(3):
        for dj in range(3):
            zp[di:di + h, dj:dj + wd] += w
    z = zp[1:-1, 1:-1].copy()
    # fold mirror-padded borders back onto their sources
    z[1, :] += zp[0, 1:-1]
    z[-2, :] += zp[-1, 1:-1]
    z[:, 1] += zp[1:-1, 0]
    z[:, -2] += zp[1:-1, -1]
    z[1, 1] += zp[0, 0]
    z[1, -2] += zp[0, -1]
    z[-2, 1] += zp[-1, 0]
    z[-2, -2] += zp[-1, -1]
    return z / 9.0


def _check_image_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError(f"images must be 2-D and at least 2x2, got {a.shape}")
    return a, b


def _ssim_stats(target: np.ndarray, candidate: np.ndarray):
    mx = _box3(target)
    my = _box3(candidate)
    sx = _box3(target * target) - mx * mx
    sy = _box3(candidate * candidate) - my * my
    sxy = _box3(target * candidate) - mx * my
    a = 2.0 * mx * my + SSIM_C1
    b = 2.0 * sxy + SSIM_C2
    c = mx * mx + my * my + SSIM_C1
    d = sx + sy + SSIM_C2
    return mx, my, a, b, c, d


def photometric_error(target: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """Per-pixel photometric error 0.85/2 (1 - SSIM) + 0.15 |target - candidate|.

    SSIM uses 3x3 block statistics (mirror-padded) with the usual stability
    constants c1 = 0.01^2, c2 = 0.03^2. Symmetric in its arguments.
    """
    target, candidate = _check_image_pair(target, candidate)
    _, _, a, b, c, d = _ssim_stats(target, candidate)
    ssim = (a * b) / (c * d)
    return 0.5 * SSIM_WEIGHT * (1.0 - ssim) + L1_WEIGHT * np.abs(target - candidate)


def photometric_error_vjp(target: np.ndarray, candidate: np.ndarray,
                          upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum(upstream * photometric_error) w.r.t. the candidate."""
    target, candidate = _check_image_pair(target, candidate)
    upstream = np.asarray(upstream, dtype=np.float64)
    mx, my, a, b, c, d = _ssim_stats(target, candidate)
    cd = c * d
    u_s = -0.5 * SSIM_WEIGHT * upstream  # d pe / d SSIM
    ga = u_s * b / cd
    gb = u_s * a / cd
    gc = -u_s * a * b / (c * cd)
    gd = -u_s * a * b / (cd * d)
    # b and d also depend on my through sxy = box(tc) - mx my, sy = box(cc) - my^2
    g_my = 2.0 * mx * (ga - gb) + 2.0 * my * (gc - gd)
    g_box_tc = 2.0 * gb
    g_box_cc = gd
    grad = (_box3_adjoint(g_my)
            + _box3_adjoint(g_box_tc) * target
            + _box3_adjoint(g_box_cc) * 2.0 * candidate
            + L1_WEIGHT * np.sign(candidate - target) * upstream)
    return grad


def reg_loss(alpha: AttentionMap, tau: float) -> LossReport:
    """Attention budget: max(0, tau - mean(alpha))^2 / tau^2, in [0, 1]."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    a = alpha.values
    hinge = max(0.0, tau - float(a.mean()))
    value = hinge * hinge / (tau * tau)
    g = np.full(a.shape, -2.0 * hinge / (tau * tau * a.size))
    return LossReport(value=value, grad_alpha=g)


def const_loss(d_hat: DepthField, prior: GroundPrior, alpha: AttentionMap) -> LossReport:
    """Prior consistency: mean(alpha^2 |D_hat - G|) over all pixels.

    Uses the pre-fusion depth. Invalid prior pixels contribute 0 (alpha is
    pinned to 0 there). sign(0) = 0 at the absolute value's kink.
    """
    if d_hat.shape != prior.shape or d_hat.shape != alpha.shape:
        raise ValueError(
            f"shape mismatch: depth {d_hat.shape}, prior {prior.shape}, "
            f"attention {alpha.shape}")
    a = alpha.values
    diff = d_hat.values - prior.depth.values
    adiff = np.where(prior.valid, np.abs(diff), 0.0)
    sgn = np.where(prior.valid, np.sign(diff), 0.0)
    n = a.size
    value = float((a * a * adiff).sum() / n)
    return LossReport(value=value,
                      grad_depth=a * a * sgn / n,
                      grad_alpha=2.0 * a * adiff / n)


def smooth_loss(depth: np.ndarray, image: np.ndarray) -> LossReport:
    """Edge-aware smoothness of mean-normalized inverse depth.

    s = (1/d) / mean(1/d); the loss is the mean of |dx s| exp(-|dx I|) over
    the horizontal stencil plus the mean of |dy s| exp(-|dy I|) over the
    vertical one. Constant depth gives exactly 0.
    """
    if isinstance(depth, DepthField):
        depth = depth.values
    depth, image = _check_image_pair(depth, image)
    if np.any(depth <= 0):
        raise ValueError("smooth_loss requires positive depth everywhere")
    q = 1.0 / depth
    m = q.mean()
    s = q / m

    dsx = s[:, 1:] - s[:, :-1]
    dsy = s[1:, :] - s[:-1, :]
    wx = np.exp(-np.abs(image[:, 1:] - image[:, :-1]))
    wy = np.exp(-np.abs(image[1:, :] - image[:-1, :]))
    value = float(np.mean(np.abs(dsx) * wx) + np.mean(np.abs(dsy) * wy))

    g_s = np.zeros_like(s)
    cx = np.sign(dsx) * wx / dsx.size
    g_s[:, 1:] += cx
    g_s[:, :-1] -= cx
    cy = np.sign(dsy) * wy / dsy.size
    g_s[1:, :] += cy
    g_s[:-1, :] -= cy

    # s = q / mean(q): route the gradient through the normalization
    dot = float((g_s * q).sum())
    g_q = g_s / m - dot / (m * m * q.size)
    grad_depth = -g_q / (depth * depth)
    return LossReport(value=value, grad_depth=grad_depth)


def _warped_errors(target: np.ndarray, sources: list, poses: list, depth,
                   cam: CameraModel):
    """Warps, filled candidates, and the two photometric error stacks.

    Invalid warp pixels take the target's own value as candidate: they are
    masked to inf anyway, and the fill keeps the window statistics of their
    valid neighbors free of artificial edges. The gradient checker uses the
    same function, so its margins see exactly the loss's error surface.
    """
    warps = [warp(np.asarray(s, dtype=np.float64), depth, p, cam)
             for s, p in zip(sources, poses)]
    cands = [np.where(w.valid, w.values, target) for w in warps]
    pe_warp = np.stack([
        np.where(w.valid, photometric_error(target, c), np.inf)
        for w, c in zip(warps, cands)])
    pe_ident = np.stack([photometric_error(target, np.asarray(s, dtype=np.float64))
                         for s in sources])
    return warps, cands, pe_warp, pe_ident


def reproj_loss(target: np.ndarray, sources: list, depth, poses: list,
                cam: CameraModel) -> LossReport:
    """Auto-masked minimum reprojection error.

    Per pixel: the smallest photometric error over the warped sources
    (invalid samples excluded; ties resolve to the first source). Pixels
    where that minimum fails to beat the smallest unwarped (identity) error,
    or where no warp is valid, are excluded from the mean. Gradients flow to
    the depth and to each source's pose; the mask and the argmin are treated
    as constants of the linearization.
    """
    if isinstance(depth, DepthField):
        depth = depth.values
    target = np.asarray(target, dtype=np.float64)
    if len(sources) == 0 or len(sources) != len(poses):
        raise ValueError(
            f"need equally many sources and poses, got {len(sources)} and {len(poses)}")

    warps, cands, pe_warp, pe_ident = _warped_errors(target, sources, poses,
                                                     depth, cam)
    min_warp = pe_warp.min(axis=0)
    winner = pe_warp.argmin(axis=0)  # first source wins ties
    min_ident = pe_ident.min(axis=0)
    kept = np.isfinite(min_warp) & (min_warp < min_ident)
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise DegenerateBatchError(
            "auto-mask removed every pixel (warping never beats identity)")

    value = float(min_warp[kept].mean())

    grad_depth = np.zeros_like(depth)
    grad_pose = []
    for k, w in enumerate(warps):
        sel = kept & (winner == k)
        if not sel.any():
            grad_pose.append(np.zeros(6))
            continue
        upstream = np.where(sel, 1.0 / n_kept, 0.0)
        g_img = photometric_error_vjp(target, cands[k], upstream)
        grad_depth += g_img * w.dval_ddepth
        grad_pose.append((g_img[:, :, None] * w.dval_dpose).sum(axis=(0, 1)))

    return LossReport(value=value, grad_depth=grad_depth, grad_pose=grad_pose,
                      mask=kept, kept=n_kept)


def total_loss(target: np.ndarray, sources: list, poses: list, cam: CameraModel,
               d_hat: DepthField, alpha: AttentionMap, prior: GroundPrior,
               tau: float, weights: LossWeights = LossWeights()) -> LossReport:
    """Weighted sum of all four terms with gradients w.r.t. the raw fields.

    Reprojection and smoothness act on the fused depth (the gradient chains
    through the blend); prior consistency and the budget act on the
    pre-fusion depth and the attention directly.
    """
    fused = fuse(d_hat, prior, alpha)
    rep = reproj_loss(target, sources, fused, poses, cam)
    smo = smooth_loss(fused.values, target)
    con = const_loss(d_hat, prior, alpha)
    bud = reg_loss(alpha, tau)

    w = weights
    value = rep.value + w.smooth * smo.value + w.const * con.value + w.reg * bud.value

    g_fused = rep.grad_depth + w.smooth * smo.grad_depth
    p_dhat, p_alpha = fusion_partials(d_hat, prior, alpha)
    grad_depth = g_fused * p_dhat + w.const * con.grad_depth
    grad_alpha = g_fused * p_alpha + w.const * con.grad_alpha + w.reg * bud.grad_alpha

    return LossReport(value=float(value),
                      grad_depth=grad_depth,
                      grad_alpha=grad_alpha,
                      grad_pose=rep.grad_pose,
                      mask=rep.mask,
                      kept=rep.kept,
                      breakdown={"reproj": rep.value, "smooth": smo.value,
                                 "const": con.value, "reg": bud.value})
