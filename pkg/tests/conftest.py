from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make tests/oracles.py importable

from lidarsynth import parse_scene, demo_scene_path
from lidarsynth.raycast import warmup


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Pay the JIT compile cost once, outside timed assertions.
    warmup()


@pytest.fixture(scope="session")
def demo_scene():
    return parse_scene(Path(demo_scene_path()).read_text())


MINI_SCENE = """
name mini
duration 1
frame_rate 5
seed 7

object {
  id 1
  class vehicle
  subtype car
  reflectivity 0.6
  keyframe 0 6 0 0 0
  keyframe 1 7 0 0 0
}

object {
  id 2
  class pedestrian
  subtype adult
  keyframe 0 0 6 0 1.5707963267948966
  keyframe 1 0 7 0 1.5707963267948966
}

sensor {
  id 0
  position 0 0 5
  azimuth_steps 512
}
"""


@pytest.fixture(scope="session")
def mini_scene():
    """Small scene (1 car, 1 pedestrian, 1 sensor, 5 frames) for fast tests."""
    return parse_scene(MINI_SCENE)


def random_boxes(rng: np.random.Generator, n: int, class_label: str = "vehicle"):
    """Random plausible boxes for metric tests."""
    from lidarsynth.annotate import BoundingBox3D

    boxes = []
    for _ in range(n):
        center = rng.uniform(-10, 10, 3)
        dims = tuple(rng.uniform(0.5, 5.0, 3))
        yaw = rng.uniform(-np.pi, np.pi)
        boxes.append(BoundingBox3D(class_label=class_label, object_id=0,
                                   center=center, dims=dims, yaw=yaw))
    return boxes
