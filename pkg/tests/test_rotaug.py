"""Rotation augmentation of images, priors, and sparse depth."""

import numpy as np
import pytest
from dataclasses import replace

from groundscale import (AngleRangeError, PixelSample, augment_ground,
                         augment_sparse_depth, compose_rotation, ground_depth,
                         render, rotate_image, unproject)
from groundscale.grids import ScalarGrid


def test_zero_angles_identity(scene, frame_pair):
    target, _ = frame_pair
    out = rotate_image(target.image, scene.camera)
    assert out.valid.all()
    np.testing.assert_allclose(out.values, target.image, atol=1e-12)


def test_angle_limits_enforced(scene, frame_pair):
    target, _ = frame_pair
    with pytest.raises(AngleRangeError):
        rotate_image(target.image, scene.camera, pitch=5.2)
    with pytest.raises(AngleRangeError):
        augment_ground(scene.camera, yaw=15.3)
    out = rotate_image(target.image, scene.camera, pitch=5.2, force=True)
    assert out.values.shape == target.image.shape


def test_image_shape_checked(scene):
    with pytest.raises(ValueError):
        rotate_image(np.zeros((10, 10)), scene.camera, pitch=1.0)


def test_augment_ground_equals_composed(scene):
    for angles in [(2.0, 1.0, 4.0), (-3.0, 0.0, 0.0), (0.0, 4.5, -12.0)]:
        ag = augment_ground(scene.camera, *angles)
        gd = ground_depth(compose_rotation(scene.camera, *angles))
        np.testing.assert_array_equal(ag.depth.values, gd.depth.values)
        np.testing.assert_array_equal(ag.valid, gd.valid)
        np.testing.assert_array_equal(ag.normalized.values, gd.normalized.values)


def test_rotate_image_matches_rerender(scene, frame_pair):
    target, _ = frame_pair
    rng = np.random.default_rng(51)
    for _ in range(3):
        p = float(rng.uniform(-5, 5))
        r = float(rng.uniform(-5, 5))
        y = float(rng.uniform(-15, 15))
        out = rotate_image(target.image, scene.camera, p, r, y)
        oracle = render(replace(scene, camera=compose_rotation(scene.camera, p, r, y)))
        diff = np.abs(out.values - oracle.image)[out.valid]
        assert diff.mean() < 2e-2


def test_sparse_grid_and_point_paths_agree(scene, frame_pair):
    target, _ = frame_pair
    cam = scene.camera
    angles = (1.5, -2.0, 6.0)
    grid_out = augment_sparse_depth(cam, target.depth, *angles)

    vv, uu = np.nonzero(target.depth.valid)
    pts = unproject(cam, PixelSample(uu.astype(np.float64),
                                     vv.astype(np.float64),
                                     target.depth.values[vv, uu]))
    pts_out = augment_sparse_depth(cam, pts.as_array(), *angles)
    np.testing.assert_array_equal(grid_out.valid, pts_out.valid)
    np.testing.assert_allclose(grid_out.masked(), pts_out.masked(), atol=1e-12)


def test_sparse_zero_angles_round_trip(scene, frame_pair):
    # pixel centers reproject onto themselves, so depths pass through
    target, _ = frame_pair
    out = augment_sparse_depth(scene.camera, target.depth)
    np.testing.assert_array_equal(out.valid, target.depth.valid)
    np.testing.assert_allclose(out.masked(), target.depth.masked(), atol=1e-9)


def test_sparse_plane_points_match_prior(scene):
    cam = scene.camera
    rng = np.random.default_rng(52)
    for _ in range(4):
        p = float(rng.uniform(-5, 5))
        r = float(rng.uniform(-5, 5))
        y = float(rng.uniform(-15, 15))
        ag = augment_ground(cam, p, r, y)
        rot = compose_rotation(cam, p, r, y)
        vv, uu = np.nonzero(ag.valid)
        pts = unproject(rot, PixelSample(uu.astype(np.float64),
                                         vv.astype(np.float64),
                                         ag.depth.values[vv, uu]))
        sp = augment_sparse_depth(cam, pts.as_array(), p, r, y)
        cov = sp.valid & ag.valid
        assert cov.sum() > 0.9 * len(vv)
        np.testing.assert_allclose(sp.values[cov], ag.depth.values[cov],
                                   rtol=1e-6)


def test_sparse_shape_validation(scene):
    with pytest.raises(ValueError):
        augment_sparse_depth(scene.camera,
                             ScalarGrid.full(np.ones((3, 3))), pitch=1.0)
