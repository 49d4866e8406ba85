"""Rigid poses, bilinear sampling, and the differentiable inverse warp."""

import numpy as np
import pytest
from dataclasses import replace

from groundscale import (RigidPose, bilinear_sample, euler_matrix,
                         moved_camera, project, warp, Point3)

from test_camgeo import make_camera


def test_identity_and_scaled():
    p = RigidPose(euler_matrix(1.0, 2.0, 3.0), np.array([1.0, -2.0, 0.5]))
    np.testing.assert_array_equal(RigidPose.identity().R, np.eye(3))
    s = p.scaled(2.0)
    np.testing.assert_array_equal(s.R, p.R)
    np.testing.assert_array_equal(s.t, 2.0 * p.t)


def test_pose_rotation_checked():
    with pytest.raises(ValueError):
        RigidPose(2 * np.eye(3), np.zeros(3))


def test_moved_camera_observes_moved_points():
    rng = np.random.default_rng(31)
    for _ in range(20):
        cam = make_camera(rng)
        pose = RigidPose(euler_matrix(*rng.uniform(-5, 5, size=3)),
                         rng.uniform(-1, 1, size=3))
        pts = rng.uniform(-3, 3, size=(40, 3))
        pts[:, 2] += 20.0  # keep everything well in front
        moved = pts @ pose.R.T + pose.t
        u1, v1 = project(moved_camera(cam, pose), Point3(*pts.T))
        u2, v2 = project(cam, Point3(*moved.T))
        np.testing.assert_allclose(u1, u2, atol=1e-9)
        np.testing.assert_allclose(v1, v2, atol=1e-9)


def test_bilinear_exact_at_centers():
    rng = np.random.default_rng(32)
    img = rng.random((7, 9))
    uu, vv = np.meshgrid(np.arange(9.0), np.arange(7.0))
    out = bilinear_sample(img, uu, vv)
    assert out.valid.all()
    np.testing.assert_array_equal(out.values, img)


def test_bilinear_hand_case():
    img = np.array([[0.0, 1.0], [2.0, 3.0]])
    out = bilinear_sample(img, np.array([0.5]), np.array([0.5]))
    assert out.valid[0]
    assert abs(out.values[0] - 1.5) < 1e-15
    quarter = bilinear_sample(img, np.array([0.25]), np.array([0.0]))
    assert abs(quarter.values[0] - 0.25) < 1e-15


def test_bilinear_outside_invalid():
    img = np.zeros((4, 4))
    out = bilinear_sample(img, np.array([-0.1, 3.1, 1.0]),
                          np.array([1.0, 1.0, 4.0]))
    np.testing.assert_array_equal(out.valid, [False, False, False])
    inside = bilinear_sample(img, np.array([0.0, 3.0]), np.array([3.0, 0.0]))
    assert inside.valid.all()


def test_warp_identity_pose_returns_source():
    rng = np.random.default_rng(33)
    cam = make_camera(rng, width=24, height=18)
    source = rng.random((18, 24))
    depth = rng.uniform(2.0, 10.0, size=(18, 24))
    out = warp(source, depth, RigidPose.identity(), cam)
    assert out.valid.all()
    np.testing.assert_allclose(out.values, source, atol=1e-12)
    # identity warp is insensitive to depth
    np.testing.assert_allclose(out.dval_ddepth, 0.0, atol=1e-9)


def test_warp_known_shift():
    # fronto-parallel plane at depth d, pure x-translation: the image
    # shifts by fx * tx / d pixels
    rng = np.random.default_rng(34)
    cam = make_camera(rng, width=32, height=20)
    cam = replace(cam, R=np.eye(3), t=np.zeros(3))
    source = rng.random((20, 32))
    d = 5.0
    tx = -0.7
    shift = cam.fx * tx / d
    out = warp(source, np.full((20, 32), d), RigidPose(np.eye(3), [tx, 0, 0]), cam)
    uu = np.arange(32.0) + shift
    ok = (uu >= 0) & (uu <= 31)
    expect = bilinear_sample(source, np.tile(uu, (20, 1)),
                             np.tile(np.arange(20.0)[:, None], (1, 32)))
    np.testing.assert_array_equal(out.valid, expect.valid)
    np.testing.assert_allclose(out.values[:, ok], expect.values[:, ok],
                               atol=1e-10)


def test_warp_gradients_zero_outside_valid():
    rng = np.random.default_rng(35)
    cam = make_camera(rng, width=16, height=12)
    source = rng.random((12, 16))
    depth = rng.uniform(2.0, 6.0, size=(12, 16))
    pose = RigidPose(np.eye(3), [2.0, 0.0, 0.0])  # pushes samples off-image
    out = warp(source, depth, pose, cam)
    assert (~out.valid).any()
    assert np.all(out.dval_ddepth[~out.valid] == 0.0)
    assert np.all(out.dval_dpose[~out.valid] == 0.0)
    assert out.dval_dpose.shape == (12, 16, 6)


def test_warp_depth_and_translation_gradients_on_linear_image():
    # bilinear interpolation reproduces a linear image exactly, with the
    # same gradient on both sides of every cell boundary: no kinks, so
    # central differences must match everywhere that stays valid
    rng = np.random.default_rng(36)
    a, b, c = 0.03, -0.02, 0.4
    uu, vv = np.meshgrid(np.arange(16.0), np.arange(12.0))
    source = a * uu + b * vv + c
    for _ in range(5):
        cam = make_camera(rng, width=16, height=12)
        depth = rng.uniform(3.0, 6.0, size=(12, 16))
        pose = RigidPose(euler_matrix(*rng.uniform(-2, 2, size=3)),
                         rng.uniform(-0.3, 0.3, size=3))
        out = warp(source, depth, pose, cam)
        eps = 1e-6

        hi = warp(source, depth + eps, pose, cam)
        lo = warp(source, depth - eps, pose, cam)
        m = out.valid & hi.valid & lo.valid
        assert m.sum() > 40
        fd = (hi.values - lo.values) / (2 * eps)
        np.testing.assert_allclose(out.dval_ddepth[m], fd[m], atol=1e-6)

        for k in range(3):  # translation block of the 6-vector
            dt = np.zeros(3); dt[k] = eps
            hi = warp(source, depth, RigidPose(pose.R, pose.t + dt), cam)
            lo = warp(source, depth, RigidPose(pose.R, pose.t - dt), cam)
            m = out.valid & hi.valid & lo.valid
            fd = (hi.values - lo.values) / (2 * eps)
            np.testing.assert_allclose(out.dval_dpose[:, :, 3 + k][m], fd[m],
                                       atol=1e-6)
