"""Automatic ground-truth labeling of simulated frames.

One oriented box per dynamic object per frame: yaw comes from the object's
pose (not from the observed points), extents are the tight bounds of the
instantiated mesh in the yaw-aligned frame, so gait articulation makes
pedestrian boxes breathe. Objects observed with fewer than ``min_points``
points are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .scene import SceneConfig, object_mesh, pose_at, wrap_angle
from .sensor import PointCloudFrame

DEFAULT_MIN_POINTS = 5


@dataclass
class BoundingBox3D:
    class_label: str
    object_id: int
    center: np.ndarray  # (3,) float64
    dims: tuple[float, float, float]  # (length, width, height)
    yaw: float  # radians in [-pi, pi)
    num_points: int = 0

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64)
        self.yaw = wrap_angle(self.yaw)
        if any(d <= 0.0 for d in self.dims):
            raise ValueError("box dims must be positive")
        if self.num_points < 0:
            raise ValueError("num_points must be >= 0")

    @property
    def volume(self) -> float:
        return self.dims[0] * self.dims[1] * self.dims[2]


def point_in_box(p: np.ndarray, box: BoundingBox3D, epsilon: float = 0.0) -> bool:
    """Closed-box membership of one point, box inflated by epsilon."""
    return bool(points_in_box(np.asarray(p, dtype=np.float64).reshape(1, 3),
                              box, epsilon)[0])


def points_in_box(points: np.ndarray, box: BoundingBox3D,
                  epsilon: float = 0.0) -> np.ndarray:
    """Vectorized closed-box membership for an (n, 3) array."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    d = points - box.center[None, :]
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    x = c * d[:, 0] - s * d[:, 1]
    y = s * d[:, 0] + c * d[:, 1]
    l, w, h = box.dims
    return ((np.abs(x) <= l / 2.0 + epsilon)
            & (np.abs(y) <= w / 2.0 + epsilon)
            & (np.abs(d[:, 2]) <= h / 2.0 + epsilon))


def tight_box(vertices: np.ndarray, yaw: float, class_label: str,
              object_id: int, num_points: int = 0) -> BoundingBox3D:
    """Tightest yaw-aligned box covering ``vertices``."""
    rotated = geometry.rot_z(vertices, -yaw)
    lo = rotated.min(axis=0)
    hi = rotated.max(axis=0)
    center_local = 0.5 * (lo + hi)
    center = geometry.rot_z(center_local.reshape(1, 3), yaw)[0]
    dims = hi - lo
    return BoundingBox3D(class_label=class_label, object_id=object_id,
                         center=center, dims=(float(dims[0]), float(dims[1]), float(dims[2])),
                         yaw=yaw, num_points=num_points)


def annotate_frame(scene: SceneConfig, frame_index: int, frame: PointCloudFrame,
                   min_points: int = DEFAULT_MIN_POINTS) -> list[BoundingBox3D]:
    """Ground-truth boxes for one frame, sorted by object_id.

    ``frame`` must come from the same scene and frame index; num_points is
    the exact count of frame points attributed to the object.
    """
    if frame.frame_index != frame_index:
        raise ValueError(
            f"frame carries index {frame.frame_index}, expected {frame_index}")
    t = frame_index / scene.frame_rate
    counts: dict[int, int] = {}
    if frame.num_points:
        ids, n = np.unique(frame.object_ids, return_counts=True)
        counts = dict(zip(ids.tolist(), n.tolist()))

    boxes = []
    for spec in sorted(scene.objects, key=lambda o: o.object_id):
        num = counts.get(spec.object_id, 0)
        if num < min_points:
            continue
        pose = pose_at(spec.trajectory, t)
        verts, _ = object_mesh(spec, t)
        verts = geometry.rot_z(verts, pose.yaw) + np.asarray(pose.position)[None, :]
        boxes.append(tight_box(verts, pose.yaw, spec.class_label,
                               spec.object_id, num))
    return boxes
