"""Activations, attention pinning, and the depth blend with its partials."""

import numpy as np
import pytest

from groundscale import (AttentionMap, CameraModel, ContractViolationError,
                         DepthField, attention_activation,
                         attention_activation_grad, depth_activation,
                         depth_activation_grad, depth_activation_inverse,
                         fuse, fusion_partials, ground_depth)
from groundscale.grids import ScalarGrid


def reference_camera():
    return CameraModel(110.0, 110.0, 63.5, 47.5, 128, 96, np.eye(3),
                       np.zeros(3), 1.5)


def test_depth_field_requires_positive():
    with pytest.raises(ValueError):
        DepthField.full(np.array([[1.0, 0.0], [2.0, 3.0]]))
    # non-positive values hidden by the mask are fine
    d = DepthField(ScalarGrid(np.array([[1.0, -5.0]]),
                              np.array([[True, False]])))
    assert d.values[0, 1] == -5.0 and not d.valid[0, 1]


def test_depth_activation_round_trip_and_grad():
    rng = np.random.default_rng(21)
    raw = rng.uniform(-8, 50, size=400)
    d = depth_activation(raw)
    assert np.all(d > 0)
    np.testing.assert_allclose(depth_activation_inverse(d), raw, atol=1e-9)
    eps = 1e-6
    fd = (depth_activation(raw + eps) - depth_activation(raw - eps)) / (2 * eps)
    np.testing.assert_allclose(depth_activation_grad(raw), fd, atol=1e-9)
    with pytest.raises(ValueError):
        depth_activation_inverse(np.array([0.0]))


def test_attention_activation_pins_invalid():
    rng = np.random.default_rng(22)
    logits = rng.normal(size=(6, 5)) * 3
    valid = rng.random((6, 5)) < 0.5
    alpha = attention_activation(logits, valid)
    assert np.all(alpha.values[~valid] == 0.0)
    sig = 1.0 / (1.0 + np.exp(-logits))
    np.testing.assert_allclose(alpha.values[valid], sig[valid], rtol=1e-12)
    g = attention_activation_grad(logits, valid)
    assert np.all(g[~valid] == 0.0)
    eps = 1e-6
    fd = (attention_activation(logits + eps, valid).values
          - attention_activation(logits - eps, valid).values) / (2 * eps)
    np.testing.assert_allclose(g, fd, atol=1e-9)


def test_attention_map_range_checked():
    with pytest.raises(ValueError):
        AttentionMap.full(np.array([[0.5, 1.2]]))
    with pytest.raises(ValueError):
        AttentionMap.full(np.array([[-0.1, 0.5]]))


def test_fuse_blend():
    cam = reference_camera()
    prior = ground_depth(cam)
    rng = np.random.default_rng(23)
    d_hat = DepthField.full(rng.uniform(1.0, 30.0, size=prior.shape))
    logits = rng.normal(size=prior.shape)
    alpha = attention_activation(logits, prior.valid)
    fused = fuse(d_hat, prior, alpha)
    a = alpha.values
    expect = (1.0 - a) * d_hat.values + a * prior.depth.values
    np.testing.assert_array_equal(fused.values, expect)
    # alpha ~ sigmoid(-40) leaks at most ~1e-15 of the prior through
    zero = attention_activation(np.full(prior.shape, -40.0), prior.valid)
    np.testing.assert_allclose(fuse(d_hat, prior, zero).values,
                               d_hat.values, rtol=1e-12)


def test_fuse_rejects_attention_on_invalid_prior():
    cam = reference_camera()
    prior = ground_depth(cam)
    d_hat = DepthField.full(np.full(prior.shape, 5.0))
    bad = AttentionMap.full(np.full(prior.shape, 0.5))
    with pytest.raises(ContractViolationError):
        fuse(d_hat, prior, bad)


def test_fusion_partials_match_fd():
    cam = reference_camera()
    prior = ground_depth(cam)
    rng = np.random.default_rng(24)
    for _ in range(5):
        d_vals = rng.uniform(1.0, 30.0, size=prior.shape)
        logits = rng.normal(size=prior.shape)
        alpha = attention_activation(logits, prior.valid)
        upstream = rng.normal(size=prior.shape)

        def f(dv, av):
            fused = (1.0 - av) * dv + av * prior.depth.values
            return float((upstream * fused).sum())

        p_d, p_a = fusion_partials(DepthField.full(d_vals), prior, alpha)
        eps = 1e-6
        i, j = int(rng.integers(prior.shape[0])), int(rng.integers(prior.shape[1]))
        dv = d_vals.copy(); dv[i, j] += eps
        fd_d = (f(dv, alpha.values) - f(d_vals, alpha.values)) / eps
        assert abs(upstream[i, j] * p_d[i, j] - fd_d) < 1e-5
        if prior.valid[i, j]:
            av = alpha.values.copy(); av[i, j] += eps
            fd_a = (f(d_vals, av) - f(d_vals, alpha.values)) / eps
            assert abs(upstream[i, j] * p_a[i, j] - fd_a) < 1e-4
        else:
            assert p_a[i, j] == 0.0
