"""Finite-difference verification of every analytic gradient.

Each suite builds randomized small instances (8x8 grids), computes the
analytic gradient, and compares against central differences coordinate by
coordinate. The losses are piecewise smooth: absolute values, hinges, the
per-pixel minimum over sources, the auto-mask, and the bilinear sampler's
cell boundaries all have kinks. A finite-difference check is only meaningful
away from those sets, so each suite excludes coordinates whose perturbation
could cross one (the margins are orders of magnitude wider than the actual
perturbation any 1e-6 step can cause).

Relative error uses a floored denominator: |a - n| / max(|a|, |n|, floor)
with floor = max(0.05 * max|gradient|, 1e-4). Entries far below the
instance's gradient scale are thereby compared absolutely against that
scale, which keeps meaningless 0-vs-noise ratios out while still catching
any real term-sized mistake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camgeo import CameraModel, euler_matrix
from .errors import DegenerateBatchError
from .fusion import AttentionMap, DepthField, fuse, fusion_partials
from .groundprior import GroundPrior, ground_depth
from .losses import (LossWeights, _box3, _warped_errors, const_loss,
                     reg_loss, reproj_loss, smooth_loss, total_loss)
from .viewsynth import RigidPose

# Central differences carry rounding noise of roughly eps * loss / (2 step);
# at 1e-5 that noise sits near 1e-11 per entry, three decades under the
# tolerance, while truncation is still far below it (the losses are smooth
# between the excluded kink sets). Entries smaller than the floor are
# compared absolutely: floor * tol is the tightest meaningful check there.
FD_STEP = 1e-5
REL_TOL = 1e-6
FLOOR_FRAC = 0.05
ABS_FLOOR = 1e-3

# Exclusion margins around non-smooth sets, sized so no finite-difference
# probe (step times the largest coordinate-to-quantity sensitivity in the
# random instances) can cross the kink it guards.
AUTOMASK_MARGIN = 1e-3
ARGMIN_MARGIN = 1e-3
CELL_MARGIN = 1e-3
BORDER_MARGIN = 1e-3
L1_MARGIN = 1e-4
STENCIL_MARGIN = 1e-4
CONST_KINK_MARGIN = 1e-4
Z_MIN = 1e-3


@dataclass(frozen=True)
class SuiteResult:
    """Outcome of one gradient suite."""

    name: str
    instances: int
    checked: int
    excluded: int
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_err < self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "instances": self.instances,
                "checked": self.checked, "excluded": self.excluded,
                "max_rel_err": self.max_rel_err, "tol": self.tol,
                "passed": self.passed}


def _so3_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix for a rotation vector (Rodrigues)."""
    w = np.asarray(w, dtype=np.float64)
    th2 = float(w @ w)
    th = math.sqrt(th2)
    K = np.array([[0.0, -w[2], w[1]],
                  [w[2], 0.0, -w[0]],
                  [-w[1], w[0], 0.0]])
    if th < 1e-4:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
    else:
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / th2
    return np.eye(3) + a * K + b * (K @ K)


def _perturbed_pose(pose: RigidPose, coord: int, delta: float) -> RigidPose:
    """Pose moved along one of its six tangent coordinates.

    Coordinates 0..2 are a left rotation perturbation exp([w]x) R, matching
    the convention of warp's pose jacobian; 3..5 are translation.
    """
    if coord < 3:
        w = np.zeros(3)
        w[coord] = delta
        return RigidPose(_so3_exp(w) @ pose.R, pose.t)
    t = pose.t.copy()
    t[coord - 3] += delta
    return RigidPose(pose.R, t)


class _Accumulator:
    """Collects per-coordinate comparisons within one gradient block."""

    def __init__(self):
        self.rows = []  # (analytic, numeric)
        self.excluded = 0

    def add(self, analytic: float, numeric: float):
        self.rows.append((analytic, numeric))

    def skip(self, n: int = 1):
        self.excluded += n

    def max_rel_err(self) -> float:
        if not self.rows:
            return 0.0
        a = np.array([r[0] for r in self.rows])
        n = np.array([r[1] for r in self.rows])
        gmax = max(np.abs(a).max(), np.abs(n).max())
        floor = max(FLOOR_FRAC * gmax, ABS_FLOOR)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        return float((np.abs(a - n) / denom).max())


def _finish(name: str, instances: int, tol: float, *accs) -> SuiteResult:
    checked = sum(len(a.rows) for a in accs)
    excluded = sum(a.excluded for a in accs)
    err = max((a.max_rel_err() for a in accs), default=0.0)
    return SuiteResult(name=name, instances=instances, checked=checked,
                       excluded=excluded, max_rel_err=err, tol=tol)


def _random_camera(rng: np.random.Generator, n: int = 8) -> CameraModel:
    R = euler_matrix(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                     rng.uniform(-10.0, 10.0))
    return CameraModel(
        fx=rng.uniform(5.0, 8.0), fy=rng.uniform(5.0, 8.0),
        cx=(n - 1) / 2 + rng.uniform(-0.3, 0.3),
        cy=(n - 1) / 2 + rng.uniform(-0.3, 0.3),
        width=n, height=n, R=R, t=rng.uniform(-0.2, 0.2, 3),
        h=rng.uniform(1.0, 2.0))


def _smooth_image(rng: np.random.Generator, n: int = 8) -> np.ndarray:
    return _box3(rng.uniform(0.1, 0.9, (n, n)))


def _masked_alpha(rng: np.random.Generator, prior: GroundPrior) -> np.ndarray:
    a = rng.uniform(0.05, 0.95, prior.shape)
    return np.where(prior.valid, a, 0.0)


# --------------------------------------------------------------------------
# simple suites: reg, const, smooth


def check_reg(seed: int = 0, instances: int = 20, step: float = FD_STEP,
              tol: float = REL_TOL) -> SuiteResult:
    rng = np.random.default_rng(seed)
    acc = _Accumulator()
    done = 0
    while done < instances:
        n = 8
        tau = rng.uniform(0.15, 0.45)
        a = rng.uniform(0.01, 0.9, (n, n))
        if done % 2 == 1:
            a = np.minimum(a * 0.4, 1.0)  # force the hinge active
        if abs(tau - a.mean()) < 1e-6:
            continue
        alpha = AttentionMap.full(a)
        g = reg_loss(alpha, tau).grad_alpha
        for idx in range(a.size):
            ap = a.copy()
            ap.flat[idx] += step
            am = a.copy()
            am.flat[idx] -= step
            num = (reg_loss(AttentionMap.full(ap), tau).value
                   - reg_loss(AttentionMap.full(am), tau).value) / (2 * step)
            acc.add(float(g.flat[idx]), num)
        done += 1
    return _finish("reg", instances, tol, acc)


def check_const(seed: int = 0, instances: int = 20, step: float = FD_STEP,
                tol: float = REL_TOL) -> SuiteResult:
    rng = np.random.default_rng(seed)
    acc_d = _Accumulator()
    acc_a = _Accumulator()
    for _ in range(instances):
        n = 8
        cam = _random_camera(rng, n)
        prior = ground_depth(cam)
        d = rng.uniform(2.0, 9.0, (n, n))
        a = _masked_alpha(rng, prior)
        d_hat = DepthField.full(d)
        alpha = AttentionMap.full(a)
        rep = const_loss(d_hat, prior, alpha)
        kink = prior.valid & (np.abs(d - prior.depth.values) < CONST_KINK_MARGIN)

        def value(dv, av):
            return const_loss(DepthField.full(dv), prior,
                              AttentionMap.full(av)).value

        for idx in range(d.size):
            if kink.flat[idx]:
                acc_d.skip()
                continue
            dp = d.copy()
            dp.flat[idx] += step
            dm = d.copy()
            dm.flat[idx] -= step
            acc_d.add(float(rep.grad_depth.flat[idx]),
                      (value(dp, a) - value(dm, a)) / (2 * step))
        for idx in range(a.size):
            # pinned-to-zero pixels would leave [0, 1] under a central step
            if kink.flat[idx] or not prior.valid.flat[idx]:
                acc_a.skip()
                continue
            ap = a.copy()
            ap.flat[idx] += step
            am = a.copy()
            am.flat[idx] -= step
            acc_a.add(float(rep.grad_alpha.flat[idx]),
                      (value(d, ap) - value(d, am)) / (2 * step))
    return _finish("const", instances, tol, acc_d, acc_a)


def check_smooth(seed: int = 0, instances: int = 20, step: float = FD_STEP,
                 tol: float = REL_TOL) -> SuiteResult:
    rng = np.random.default_rng(seed)
    acc = _Accumulator()
    for _ in range(instances):
        n = 8
        d = rng.uniform(2.0, 9.0, (n, n))
        img = _smooth_image(rng, n)
        rep = smooth_loss(d, img)
        skip = _stencil_kinks(d)
        for idx in range(d.size):
            if skip.flat[idx]:
                acc.skip()
                continue
            dp = d.copy()
            dp.flat[idx] += step
            dm = d.copy()
            dm.flat[idx] -= step
            num = (smooth_loss(dp, img).value - smooth_loss(dm, img).value) / (2 * step)
            acc.add(float(rep.grad_depth.flat[idx]), num)
    return _finish("smooth", instances, tol, acc)


def _stencil_kinks(depth: np.ndarray) -> np.ndarray:
    """Pixels touching a smoothness stencil whose difference is near zero.

    Only stencils containing the perturbed pixel can change sign under a
    tiny perturbation (the mean normalization rescales all others without
    crossing zero), so marking the two endpoints of every near-zero stencil
    is enough.
    """
    q = 1.0 / depth
    s = q / q.mean()
    bad = np.zeros(depth.shape, dtype=bool)
    near_x = np.abs(s[:, 1:] - s[:, :-1]) < STENCIL_MARGIN
    bad[:, 1:] |= near_x
    bad[:, :-1] |= near_x
    near_y = np.abs(s[1:, :] - s[:-1, :]) < STENCIL_MARGIN
    bad[1:, :] |= near_y
    bad[:-1, :] |= near_y
    return bad


# --------------------------------------------------------------------------
# warped suites: reproj and the full objective


def _dilate3(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= out[:, :-1].copy()
    out[:, :-1] |= out[:, 1:].copy()
    return out


def _warp_exclusions(target, sources, poses, cam, depth_values):
    """Pixels where the reprojection loss is not reliably differentiable.

    Returns (exclude, pose_clean): `exclude` marks pixels whose own
    coordinate cannot be checked; a pose check additionally requires the
    whole image free of margins (any pixel may contribute to the pose
    gradient).
    """
    h, w = depth_values.shape
    cell = np.zeros((h, w), dtype=bool)
    border = np.zeros((h, w), dtype=bool)
    zbad = np.zeros((h, w), dtype=bool)
    l1 = np.zeros((h, w), dtype=bool)
    warps, cands, pe_w, pe_i = _warped_errors(target, sources, poses,
                                              depth_values, cam)
    for wr, cand in zip(warps, cands):
        fu = np.abs(wr.u - np.round(wr.u))
        fv = np.abs(wr.v - np.round(wr.v))
        cell |= (fu < CELL_MARGIN) | (fv < CELL_MARGIN)
        border |= (np.abs(wr.u) < BORDER_MARGIN) | (np.abs(wr.u - (w - 1)) < BORDER_MARGIN)
        border |= (np.abs(wr.v) < BORDER_MARGIN) | (np.abs(wr.v - (h - 1)) < BORDER_MARGIN)
        zbad |= wr.z < Z_MIN
        l1 |= np.abs(target - cand) < L1_MARGIN
    min_w = pe_w.min(axis=0)
    min_i = pe_i.min(axis=0)
    margin = np.abs(min_w - min_i) < AUTOMASK_MARGIN
    if len(sources) > 1:
        part = np.sort(pe_w, axis=0)
        with np.errstate(invalid="ignore"):  # inf - inf where no warp is valid
            gap = part[1] - part[0]
        margin |= np.isfinite(part[1]) & (gap < ARGMIN_MARGIN)
    exclude = _dilate3(margin) | cell | border | zbad | l1
    return exclude, not bool(exclude.any())


def _reproj_instance(rng: np.random.Generator, n: int = 8):
    """A random scene for the warped suites; retried until non-degenerate."""
    for _ in range(60):
        cam = _random_camera(rng, n)
        prior = ground_depth(cam)
        if not prior.valid.any():
            continue
        target = _smooth_image(rng, n)
        n_src = 1 + int(rng.integers(0, 2))
        sources = [_smooth_image(rng, n) for _ in range(n_src)]
        poses = []
        for _ in range(n_src):
            R = _so3_exp(rng.uniform(-0.03, 0.03, 3))
            poses.append(RigidPose(R, rng.uniform(-0.25, 0.25, 3)))
        d = rng.uniform(4.0, 9.0, (n, n))
        a = _masked_alpha(rng, prior)
        d_hat = DepthField.full(d)
        alpha = AttentionMap.full(a)
        fused = fuse(d_hat, prior, alpha)
        try:
            reproj_loss(target, sources, fused, poses, cam)
        except DegenerateBatchError:
            continue
        return cam, prior, target, sources, poses, d, a
    raise RuntimeError("could not build a non-degenerate reprojection instance")


def _check_warped(name: str, seed: int, instances: int, step: float,
                  tol: float, full: bool) -> SuiteResult:
    """Shared body of the reproj and total suites.

    full=False checks the reprojection term alone, chained through fusion;
    full=True checks total_loss (adding smoothness, prior consistency and
    the budget, all through the same fused depth).
    """
    rng = np.random.default_rng(seed)
    acc_d = _Accumulator()
    acc_a = _Accumulator()
    acc_p = _Accumulator()
    done = 0
    while done < instances:
        cam, prior, target, sources, poses, d, a = _reproj_instance(rng)
        tau = rng.uniform(0.15, 0.45)
        if abs(tau - a.mean()) < 1e-6:
            continue
        weights = LossWeights()

        def value(dv, av, ps):
            d_hat = DepthField.full(dv)
            alpha = AttentionMap.full(av)
            if full:
                return total_loss(target, sources, ps, cam, d_hat, alpha,
                                  prior, tau, weights).value
            fused = fuse(d_hat, prior, alpha)
            return reproj_loss(target, sources, fused, ps, cam).value

        d_hat = DepthField.full(d)
        alpha = AttentionMap.full(a)
        fused = fuse(d_hat, prior, alpha)
        if full:
            rep = total_loss(target, sources, poses, cam, d_hat, alpha,
                             prior, tau, weights)
            grad_d = rep.grad_depth
            grad_a = rep.grad_alpha
        else:
            rep = reproj_loss(target, sources, fused, poses, cam)
            p_d, p_a = fusion_partials(d_hat, prior, alpha)
            grad_d = rep.grad_depth * p_d
            grad_a = rep.grad_depth * p_a
        grad_p = rep.grad_pose

        exclude, pose_clean = _warp_exclusions(target, sources, poses, cam,
                                               fused.values)
        if full:
            exclude = exclude | _stencil_kinks(fused.values)
            exclude = exclude | (prior.valid
                                 & (np.abs(d - prior.depth.values) < CONST_KINK_MARGIN))

        for idx in range(d.size):
            if exclude.flat[idx]:
                acc_d.skip()
                continue
            dp = d.copy()
            dp.flat[idx] += step
            dm = d.copy()
            dm.flat[idx] -= step
            acc_d.add(float(grad_d.flat[idx]),
                      (value(dp, a, poses) - value(dm, a, poses)) / (2 * step))
        for idx in range(a.size):
            # alpha at invalid prior pixels is pinned to zero by contract
            if exclude.flat[idx] or not prior.valid.flat[idx]:
                acc_a.skip()
                continue
            ap = a.copy()
            ap.flat[idx] += step
            am = a.copy()
            am.flat[idx] -= step
            acc_a.add(float(grad_a.flat[idx]),
                      (value(d, ap, poses) - value(d, am, poses)) / (2 * step))
        if pose_clean:
            for k, pose in enumerate(poses):
                for coord in range(6):
                    pp = list(poses)
                    pm = list(poses)
                    pp[k] = _perturbed_pose(pose, coord, step)
                    pm[k] = _perturbed_pose(pose, coord, -step)
                    acc_p.add(float(grad_p[k][coord]),
                              (value(d, a, pp) - value(d, a, pm)) / (2 * step))
        else:
            acc_p.skip(6 * len(poses))
        done += 1
    return _finish(name, instances, tol, acc_d, acc_a, acc_p)


def check_reproj(seed: int = 0, instances: int = 20, step: float = FD_STEP,
                 tol: float = REL_TOL) -> SuiteResult:
    return _check_warped("reproj", seed, instances, step, tol, full=False)


def check_total(seed: int = 0, instances: int = 20, step: float = FD_STEP,
                tol: float = REL_TOL) -> SuiteResult:
    return _check_warped("total", seed, instances, step, tol, full=True)


def run_all(seed: int = 0, instances: int = 20, step: float = FD_STEP,
            tol: float = REL_TOL) -> list:
    """Run every suite; deterministic for a given seed."""
    return [
        check_reg(seed=seed, instances=instances, step=step, tol=tol),
        check_const(seed=seed + 1000, instances=instances, step=step, tol=tol),
        check_smooth(seed=seed + 2000, instances=instances, step=step, tol=tol),
        check_reproj(seed=seed + 3000, instances=instances, step=step, tol=tol),
        check_total(seed=seed + 4000, instances=instances, step=step, tol=tol),
    ]
