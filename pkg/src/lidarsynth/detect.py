"""Classical baseline detector over simulated frames.

Pipeline: seeded RANSAC ground-plane removal, fixed-radius Euclidean
clustering on a spatial hash grid, PCA-oriented box fit per cluster, and a
size-window classifier (pedestrian vs vehicle). Deliberately simple: it
exists so the full generate -> detect -> evaluate loop runs without any
learned model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .annotate import BoundingBox3D
from .scene import PEDESTRIAN, VEHICLE
from .sensor import PointCloudFrame

MIN_BOX_DIM = 0.01  # floor for degenerate clusters, meters

# Size windows: (max footprint dim range, height range).
PED_FOOTPRINT_MAX = 1.2
PED_HEIGHT = (0.6, 2.2)
VEH_FOOTPRINT = (2.5, 14.0)
VEH_HEIGHT = (1.0, 4.5)
EDGE_DECAY_FRACTION = 0.15  # window fraction over which the fit factor decays


@dataclass(frozen=True)
class DetectorParams:
    ground_inlier_threshold: float = 0.15
    ransac_iterations: int = 100
    cluster_radius: float = 0.7
    min_cluster_size: int = 5
    seed: int = 0


@dataclass
class Detection:
    box: BoundingBox3D
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")


def remove_ground(frame: PointCloudFrame, inlier_threshold: float = 0.15,
                  iterations: int = 100, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split frame point indices into (ground, object) via RANSAC plane fit.

    The winning plane must be near-horizontal (|unit normal . z| >= 0.9);
    when no iteration finds one, a z <= threshold slab is used instead.
    Draws come from counter-based streams, so results depend only on
    (frame, parameters, seed).
    """
    pts = frame.positions
    n = len(pts)
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty

    best_inliers = -1
    best_plane = None  # (normal, d) with |normal| = 1
    if n >= 3:
        keys = rng.substreams(rng.stream_key(seed), np.arange(iterations))
        samples = np.stack([(rng.uniforms(keys, c) * n).astype(np.int64)
                            for c in range(3)], axis=1)
        for it in range(iterations):
            i, j, k = samples[it]
            if i == j or j == k or i == k:
                continue
            normal = np.cross(pts[j] - pts[i], pts[k] - pts[i])
            norm = np.linalg.norm(normal)
            if norm < 1e-12:
                continue
            normal = normal / norm
            if abs(normal[2]) < 0.9:
                continue
            d = -float(np.dot(normal, pts[i]))
            dist = np.abs(pts @ normal + d)
            count = int(np.count_nonzero(dist <= inlier_threshold))
            if count > best_inliers:
                best_inliers = count
                best_plane = (normal, d)

    if best_plane is None:
        ground_mask = pts[:, 2] <= inlier_threshold
    else:
        normal, d = best_plane
        ground_mask = np.abs(pts @ normal + d) <= inlier_threshold
    ground = np.nonzero(ground_mask)[0]
    objects = np.nonzero(~ground_mask)[0]
    return ground, objects


def cluster(points: np.ndarray, radius: float,
            min_cluster_size: int = 1) -> list[np.ndarray]:
    """Connected components under Euclidean distance <= radius.

    Uses a spatial hash grid with cell size = radius, so only the 27
    neighboring cells are candidate links. Components smaller than
    ``min_cluster_size`` are dropped; clusters are ordered by their
    smallest contained index and each cluster's indices are sorted.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if n == 0:
        return []

    cells = np.floor(pts / radius).astype(np.int64)
    grid: dict[tuple[int, int, int], list[int]] = {}
    for i, cell in enumerate(map(tuple, cells.tolist())):
        grid.setdefault(cell, []).append(i)
    buckets = {cell: np.array(members, dtype=np.int64)
               for cell, members in grid.items()}

    r2 = radius * radius
    visited = np.zeros(n, dtype=bool)
    clusters = []
    for seed_idx in range(n):
        if visited[seed_idx]:
            continue
        visited[seed_idx] = True
        component = [seed_idx]
        queue = [seed_idx]
        while queue:
            j = queue.pop()
            cx, cy, cz = cells[j]
            for ox in (-1, 0, 1):
                for oy in (-1, 0, 1):
                    for oz in (-1, 0, 1):
                        members = buckets.get((cx + ox, cy + oy, cz + oz))
                        if members is None:
                            continue
                        cand = members[~visited[members]]
                        if len(cand) == 0:
                            continue
                        diff = pts[cand] - pts[j]
                        near = cand[np.einsum("ij,ij->i", diff, diff) <= r2]
                        if len(near) == 0:
                            continue
                        visited[near] = True
                        component.extend(near.tolist())
                        queue.extend(near.tolist())
        if len(component) >= min_cluster_size:
            clusters.append(np.array(sorted(component), dtype=np.int64))
    clusters.sort(key=lambda c: int(c[0]))
    return clusters


def fit_box(points: np.ndarray) -> BoundingBox3D:
    """Oriented box around a cluster: yaw from the first principal axis of
    the xy covariance (restricted to [-pi/2, pi/2)), extents from the
    rotated min/max. Dims are floored at MIN_BOX_DIM."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise ValueError("fit_box needs at least 3 points")
    xy = pts[:, :2] - pts[:, :2].mean(axis=0)
    cxx = float(np.mean(xy[:, 0] * xy[:, 0]))
    cyy = float(np.mean(xy[:, 1] * xy[:, 1]))
    cxy = float(np.mean(xy[:, 0] * xy[:, 1]))
    if cxy == 0.0 and cxx == cyy:
        yaw = 0.0  # isotropic / degenerate covariance
    else:
        yaw = 0.5 * math.atan2(2.0 * cxy, cxx - cyy)
    if yaw >= math.pi / 2.0:
        yaw -= math.pi

    c, s = math.cos(-yaw), math.sin(-yaw)
    x = c * pts[:, 0] - s * pts[:, 1]
    y = s * pts[:, 0] + c * pts[:, 1]
    z = pts[:, 2]
    lo = np.array([x.min(), y.min(), z.min()])
    hi = np.array([x.max(), y.max(), z.max()])
    dims = np.maximum(hi - lo, MIN_BOX_DIM)
    mid = 0.5 * (lo + hi)
    cy_, sy_ = math.cos(yaw), math.sin(yaw)
    center = np.array([cy_ * mid[0] - sy_ * mid[1],
                       sy_ * mid[0] + cy_ * mid[1],
                       mid[2]])
    return BoundingBox3D(class_label="", object_id=-1, center=center,
                         dims=(float(dims[0]), float(dims[1]), float(dims[2])),
                         yaw=yaw, num_points=len(pts))


def _window_factor(value: float, lo: float, hi: float) -> float:
    """1.0 deep inside [lo, hi], linear decay to 0.5 at the edges."""
    margin = EDGE_DECAY_FRACTION * (hi - lo)
    if margin <= 0.0:
        return 1.0
    inner = min(value - lo, hi - value)
    if inner >= margin:
        return 1.0
    return 0.5 + 0.5 * max(0.0, inner) / margin


def classify_box(box: BoundingBox3D) -> tuple[str, float]:
    """Class label and size-fit factor for a fitted box; ('', 0) if no
    class window accepts it."""
    footprint = max(box.dims[0], box.dims[1])
    height = box.dims[2]
    if footprint <= PED_FOOTPRINT_MAX and PED_HEIGHT[0] <= height <= PED_HEIGHT[1]:
        fit = _window_factor(footprint, 0.0, PED_FOOTPRINT_MAX)
        fit = min(fit, _window_factor(height, *PED_HEIGHT))
        return PEDESTRIAN, fit
    if (VEH_FOOTPRINT[0] <= footprint <= VEH_FOOTPRINT[1]
            and VEH_HEIGHT[0] <= height <= VEH_HEIGHT[1]):
        fit = min(_window_factor(footprint, *VEH_FOOTPRINT),
                  _window_factor(height, *VEH_HEIGHT))
        return VEHICLE, fit
    return "", 0.0


def detect_frame(frame: PointCloudFrame,
                 params: DetectorParams = DetectorParams()) -> list[Detection]:
    """Run the full baseline pipeline on one frame.

    Score = clamp(num_points / 100, 0.05, 1.0) * size-fit factor, clamped
    back into [0.05, 1.0].
    """
    if frame.num_points == 0:
        return []
    _, object_idx = remove_ground(frame, params.ground_inlier_threshold,
                                  params.ransac_iterations, params.seed)
    if len(object_idx) == 0:
        return []
    obj_pts = frame.positions[object_idx]
    detections = []
    for members in cluster(obj_pts, params.cluster_radius, params.min_cluster_size):
        if len(members) < 3:
            continue
        box = fit_box(obj_pts[members])
        label, fit = classify_box(box)
        if not label:
            continue
        box.class_label = label
        box.object_id = len(detections)
        base = min(1.0, max(0.05, box.num_points / 100.0))
        score = min(1.0, max(0.05, base * fit))
        detections.append(Detection(box=box, score=score))
    return detections
