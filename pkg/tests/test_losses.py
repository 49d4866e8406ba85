"""Photometric error, the four loss terms, and their analytic gradients."""

import numpy as np
import pytest
from dataclasses import replace

from groundscale import (AttentionMap, DegenerateBatchError, DepthField,
                         LossWeights, RigidPose, attention_activation,
                         const_loss, fuse, ground_depth, photometric_error,
                         reg_loss, render, reproj_loss, smooth_loss,
                         total_loss)
from groundscale.losses import photometric_error_vjp
from groundscale.grids import ScalarGrid


def test_photometric_identical_is_zero():
    rng = np.random.default_rng(41)
    img = rng.random((10, 12))
    np.testing.assert_allclose(photometric_error(img, img), 0.0, atol=1e-12)


def test_photometric_symmetric_nonnegative():
    rng = np.random.default_rng(42)
    for _ in range(10):
        a = rng.random((8, 8))
        b = rng.random((8, 8))
        pe = photometric_error(a, b)
        np.testing.assert_allclose(pe, photometric_error(b, a), atol=1e-14)
        assert np.all(pe >= -1e-12)


def test_photometric_vjp_matches_fd():
    rng = np.random.default_rng(43)
    for _ in range(5):
        target = rng.random((6, 7))
        # keep the candidate clear of the L1 kink at candidate == target
        cand = target + rng.uniform(0.05, 0.3, size=(6, 7)) * rng.choice([-1, 1], size=(6, 7))
        cand = np.clip(cand, 0.0, 1.0)
        if np.any(np.abs(cand - target) < 1e-3):
            continue
        upstream = rng.normal(size=(6, 7))
        grad = photometric_error_vjp(target, cand, upstream)
        eps = 1e-6
        for _ in range(8):
            i = int(rng.integers(6)); j = int(rng.integers(7))
            cp = cand.copy(); cp[i, j] += eps
            cm = cand.copy(); cm[i, j] -= eps
            fd = ((upstream * photometric_error(target, cp)).sum()
                  - (upstream * photometric_error(target, cm)).sum()) / (2 * eps)
            assert abs(grad[i, j] - fd) < 1e-6 * max(1.0, abs(fd))


def test_reg_loss_hand_case():
    alpha = AttentionMap.full(np.full((4, 5), 0.2))
    rep = reg_loss(alpha, tau=0.5)
    assert abs(rep.value - 0.36) < 1e-15  # (0.5-0.2)^2 / 0.25
    np.testing.assert_allclose(rep.grad_alpha, -2.0 * 0.3 / (0.25 * 20))
    met = reg_loss(AttentionMap.full(np.full((4, 5), 0.6)), tau=0.5)
    assert met.value == 0.0
    np.testing.assert_array_equal(met.grad_alpha, 0.0)


def test_reg_loss_tau_validation():
    alpha = AttentionMap.full(np.full((2, 2), 0.5))
    for tau in (0.0, 1.0, -0.3, 2.0):
        with pytest.raises(ValueError):
            reg_loss(alpha, tau)


def test_reg_loss_range():
    rng = np.random.default_rng(44)
    for _ in range(20):
        alpha = AttentionMap.full(rng.random((6, 6)))
        tau = float(rng.uniform(0.05, 0.95))
        v = reg_loss(alpha, tau).value
        assert 0.0 <= v <= 1.0


def test_const_loss_hand_case(scene):
    prior = ground_depth(scene.camera)
    shape = prior.shape
    d_vals = prior.depth.masked(1.0) + 2.0  # off by exactly 2 on valid prior
    d_hat = DepthField.full(d_vals)
    alpha = attention_activation(np.zeros(shape), prior.valid)  # 0.5 on valid
    rep = const_loss(d_hat, prior, alpha)
    nv = int(prior.valid.sum())
    expect = 0.25 * 2.0 * nv / prior.valid.size
    assert abs(rep.value - expect) < 1e-12
    # gradient: alpha^2 sign / N toward the prior, zero elsewhere
    np.testing.assert_allclose(rep.grad_depth[prior.valid],
                               0.25 / prior.valid.size)
    np.testing.assert_array_equal(rep.grad_depth[~prior.valid], 0.0)
    np.testing.assert_allclose(rep.grad_alpha[prior.valid],
                               2.0 * 0.5 * 2.0 / prior.valid.size)


def test_const_loss_zero_at_prior(scene):
    prior = ground_depth(scene.camera)
    d_hat = DepthField.full(prior.depth.masked(5.0))
    alpha = attention_activation(np.zeros(prior.shape), prior.valid)
    rep = const_loss(d_hat, prior, alpha)
    assert rep.value == 0.0
    np.testing.assert_array_equal(rep.grad_depth, 0.0)
    np.testing.assert_array_equal(rep.grad_alpha, 0.0)


def test_smooth_loss_constant_depth_zero():
    rng = np.random.default_rng(45)
    img = rng.random((8, 9))
    rep = smooth_loss(np.full((8, 9), 7.3), img)
    assert rep.value == 0.0


def test_smooth_loss_hand_case():
    # 2x2: s = (1/d)/mean(1/d); dark image edge weights exp(-|dI|)
    depth = np.array([[1.0, 2.0], [1.0, 2.0]])
    image = np.array([[0.0, 0.5], [0.0, 0.0]])
    q = 1.0 / depth
    s = q / q.mean()
    dx = np.abs(s[:, 1] - s[:, 0])
    wx = np.exp(-np.abs(image[:, 1] - image[:, 0]))
    expect = np.mean(dx * wx)  # vertical differences vanish
    rep = smooth_loss(depth, image)
    assert abs(rep.value - expect) < 1e-15


def test_smooth_loss_gradient_matches_fd():
    rng = np.random.default_rng(46)
    for _ in range(5):
        depth = rng.uniform(2.0, 8.0, size=(6, 7))
        image = rng.random((6, 7))
        rep = smooth_loss(depth, image)
        eps = 1e-6
        for _ in range(8):
            i = int(rng.integers(6)); j = int(rng.integers(7))
            dp = depth.copy(); dp[i, j] += eps
            dm = depth.copy(); dm[i, j] -= eps
            fd = (smooth_loss(dp, image).value
                  - smooth_loss(dm, image).value) / (2 * eps)
            assert abs(rep.grad_depth[i, j] - fd) < 1e-7 * max(1.0, abs(fd)) + 1e-9


def test_smooth_loss_rejects_nonpositive_depth():
    with pytest.raises(ValueError):
        smooth_loss(np.zeros((4, 4)), np.zeros((4, 4)))


def test_reproj_static_pair_fully_masked(scene, frame_pair):
    # identical frames under the identity motion: warping never improves
    # on the unwarped error, so the auto-mask drops every pixel
    target, _ = frame_pair
    depth = DepthField.full(np.full(target.image.shape, 5.0))
    with pytest.raises(DegenerateBatchError):
        reproj_loss(target.image, [target.image], depth,
                    [RigidPose.identity()], scene.camera)


def test_reproj_on_rendered_pair(scene, frame_pair):
    target, source = frame_pair
    gt = np.where(target.depth.valid, target.depth.values, 60.0)
    rep = reproj_loss(target.image, [source.image], DepthField.full(gt),
                      [scene.baseline], scene.camera)
    assert rep.value > 0.0
    assert rep.kept == int(rep.mask.sum()) > 0
    assert rep.grad_depth.shape == target.image.shape
    assert len(rep.grad_pose) == 1 and rep.grad_pose[0].shape == (6,)
    assert np.isfinite(rep.grad_depth).all()


def test_reproj_input_validation(scene, frame_pair):
    target, source = frame_pair
    depth = DepthField.full(np.full(target.image.shape, 5.0))
    with pytest.raises(ValueError):
        reproj_loss(target.image, [], depth, [], scene.camera)
    with pytest.raises(ValueError):
        reproj_loss(target.image, [source.image], depth, [], scene.camera)


def test_total_loss_is_weighted_sum(scene, frame_pair):
    target, source = frame_pair
    prior = ground_depth(scene.camera)
    rng = np.random.default_rng(47)
    gt = np.where(target.depth.valid, target.depth.values, 60.0)
    d_hat = DepthField.full(gt * np.exp(rng.uniform(-0.2, 0.2, size=gt.shape)))
    alpha = attention_activation(rng.normal(size=gt.shape), prior.valid)
    weights = LossWeights(smooth=0.02, const=0.3, reg=0.15)
    tau = 0.3

    rep = total_loss(target.image, [source.image], [scene.baseline],
                     scene.camera, d_hat, alpha, prior, tau, weights)
    fused = fuse(d_hat, prior, alpha)
    parts = {
        "reproj": reproj_loss(target.image, [source.image], fused,
                              [scene.baseline], scene.camera).value,
        "smooth": smooth_loss(fused.values, target.image).value,
        "const": const_loss(d_hat, prior, alpha).value,
        "reg": reg_loss(alpha, tau).value,
    }
    assert rep.breakdown == pytest.approx(parts, rel=1e-15)
    expect = (parts["reproj"] + weights.smooth * parts["smooth"]
              + weights.const * parts["const"] + weights.reg * parts["reg"])
    assert abs(rep.value - expect) < 1e-15


def test_loss_weights_defaults():
    w = LossWeights()
    assert (w.smooth, w.const, w.reg) == (1e-2, 0.1, 0.1)
