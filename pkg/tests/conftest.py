"""Shared fixtures: the reference scene and its rendered frame pair.

Renders are cached per session; individual tests must not mutate them
(render results hold plain arrays, so tests copy before writing).
"""

import pytest

from groundscale import ground_depth, reference_scene, render


@pytest.fixture(scope="session")
def scene():
    return reference_scene(seed=0)


@pytest.fixture(scope="session")
def frame_pair(scene):
    target = render(scene)
    source = render(scene, scene.baseline)
    return target, source


@pytest.fixture(scope="session")
def prior(scene):
    return ground_depth(scene.camera)
