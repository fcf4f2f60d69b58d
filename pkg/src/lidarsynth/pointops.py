"""Point-cloud preprocessing operators: furthest point sampling and
voxelization (the geometric front-ends of keypoint- and voxel-based
detectors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_NUM_KEYPOINTS = 4096
DEFAULT_VOXEL_SIZE = (0.1, 0.1, 0.15)
DEFAULT_MAX_POINTS_PER_VOXEL = 32
DEFAULT_MAX_VOXELS = 40_000


def furthest_point_sampling(points: np.ndarray, k: int,
                            start_index: int = 0) -> np.ndarray:
    """Greedy furthest point sampling over 3D Euclidean distance.

    Returns selection-order indices. Starting from ``start_index``, each
    step picks the point maximizing the minimum distance to the selected
    set; ties resolve to the lowest index. If k >= len(points) all indices
    are returned in original order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        raise ValueError("furthest_point_sampling needs a nonempty point set")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= start_index < n:
        raise ValueError(f"start_index {start_index} out of range [0, {n})")
    if k >= n:
        return np.arange(n, dtype=np.int64)

    selected = np.empty(k, dtype=np.int64)
    selected[0] = start_index
    # Squared distances compare identically to distances and skip the sqrt.
    d = np.einsum("ij,ij->i", pts - pts[start_index], pts - pts[start_index])
    d[start_index] = -1.0  # selected points can never win argmax
    for i in range(1, k):
        nxt = int(np.argmax(d))  # first occurrence of the max = lowest index
        selected[i] = nxt
        diff = pts - pts[nxt]
        np.minimum(d, np.einsum("ij,ij->i", diff, diff), out=d)
        d[nxt] = -1.0
    return selected


@dataclass
class VoxelGrid:
    """Bucketed points: coords[i] is the integer cell of voxel i,
    point_indices[i] the kept (possibly truncated) input indices in input
    order, counts[i] the total number of points that mapped to the cell."""

    voxel_size: tuple[float, float, float]
    range_min: np.ndarray
    range_max: np.ndarray
    coords: np.ndarray  # (v, 3) int64
    point_indices: list[np.ndarray]
    counts: np.ndarray  # (v,) int64, pre-truncation totals
    max_points_per_voxel: int
    max_voxels: int

    @property
    def num_voxels(self) -> int:
        return len(self.coords)

    def voxels(self):
        """Iterate (coordinate triple, point indices, count) per voxel."""
        for i in range(self.num_voxels):
            yield tuple(self.coords[i]), self.point_indices[i], int(self.counts[i])


def voxelize(points: np.ndarray,
             voxel_size=DEFAULT_VOXEL_SIZE,
             range_min=(-80.0, -80.0, -2.0),
             range_max=(80.0, 80.0, 6.0),
             max_points_per_voxel: int = DEFAULT_MAX_POINTS_PER_VOXEL,
             max_voxels: int = DEFAULT_MAX_VOXELS) -> VoxelGrid:
    """Bucket points into a regular grid over [range_min, range_max).

    Points outside the half-open range are discarded. Voxels appear in
    first-occurrence order and are truncated at ``max_voxels``; points in
    a voxel keep input order and are truncated at ``max_points_per_voxel``
    (counts still record the full total).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    vs = np.asarray(voxel_size, dtype=np.float64)
    rmin = np.asarray(range_min, dtype=np.float64)
    rmax = np.asarray(range_max, dtype=np.float64)
    if np.any(vs <= 0.0):
        raise ValueError("voxel_size must be positive")
    if np.any(rmin >= rmax):
        raise ValueError("range_min must be < range_max componentwise")
    if max_points_per_voxel < 1 or max_voxels < 1:
        raise ValueError("max_points_per_voxel and max_voxels must be >= 1")

    in_range = np.all((pts >= rmin) & (pts < rmax), axis=1)
    idx = np.nonzero(in_range)[0]
    coords = np.floor((pts[idx] - rmin) / vs).astype(np.int64)
    # Float division can land one cell off near boundaries; nudge back so
    # range_min + c*size <= p < range_min + (c+1)*size holds exactly.
    lo = rmin + coords * vs
    coords = np.where(pts[idx] < lo, coords - 1, coords)
    hi = rmin + (coords + 1) * vs
    coords = np.where(pts[idx] >= hi, coords + 1, coords)

    order: dict[tuple[int, int, int], int] = {}
    kept: list[list[int]] = []
    totals: list[int] = []
    cell_list: list[tuple[int, int, int]] = []
    full = False
    for j, point_index in enumerate(idx.tolist()):
        cell = (int(coords[j, 0]), int(coords[j, 1]), int(coords[j, 2]))
        slot = order.get(cell)
        if slot is None:
            if full or len(cell_list) >= max_voxels:
                full = True
                continue
            slot = len(cell_list)
            order[cell] = slot
            cell_list.append(cell)
            kept.append([])
            totals.append(0)
        totals[slot] += 1
        if len(kept[slot]) < max_points_per_voxel:
            kept[slot].append(point_index)

    return VoxelGrid(
        voxel_size=(float(vs[0]), float(vs[1]), float(vs[2])),
        range_min=rmin,
        range_max=rmax,
        coords=np.array(cell_list, dtype=np.int64).reshape(-1, 3),
        point_indices=[np.array(k, dtype=np.int64) for k in kept],
        counts=np.array(totals, dtype=np.int64),
        max_points_per_voxel=max_points_per_voxel,
        max_voxels=max_voxels,
    )
