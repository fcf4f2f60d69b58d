"""Triangle-mesh ray casting on a bounding-volume hierarchy.

The BVH is built by median split on the longest centroid axis with at most
4 triangles per leaf, stored as flat numpy arrays, and traversed by numba
kernels so 10^6+ nearest-hit queries per second are reachable on scenes of
~10^5 triangles.

Nearest-hit rule: smallest t wins; an exact tie on t (e.g. a ray through a
shared edge of two triangles) is attributed to the lowest original triangle
index, so seams of compound meshes never yield duplicate points. Hits with
t < 1e-6 m are rejected to avoid self-intersection re-hits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numba as nb
import numpy as np

T_EPSILON = 1e-6  # minimum accepted hit distance, meters
MIN_TRIANGLE_AREA = 1e-12  # square meters
LEAF_SIZE = 4


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with per-triangle object id and reflectivity."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int64 vertex indices
    object_ids: np.ndarray  # (m,) int64
    reflectivity: np.ndarray  # (m,) float64 in [0, 1]

    def __post_init__(self) -> None:
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        m = len(self.triangles)
        self.object_ids = np.ascontiguousarray(self.object_ids, dtype=np.int64)
        self.reflectivity = np.ascontiguousarray(self.reflectivity, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must have shape (m, 3)")
        if self.object_ids.shape != (m,) or self.reflectivity.shape != (m,):
            raise ValueError("per-triangle attribute arrays must have length m")
        if m and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle vertex index out of range")
        if m:
            a = self.vertices[self.triangles[:, 0]]
            e1 = self.vertices[self.triangles[:, 1]] - a
            e2 = self.vertices[self.triangles[:, 2]] - a
            areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
            if np.any(areas <= MIN_TRIANGLE_AREA):
                bad = int(np.argmax(areas <= MIN_TRIANGLE_AREA))
                raise ValueError(f"degenerate triangle {bad} (area <= {MIN_TRIANGLE_AREA})")

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)


def make_mesh(vertices: np.ndarray, triangles: np.ndarray, object_id: int,
              reflectivity: float) -> TriangleMesh:
    """Mesh whose triangles all carry one object id and one reflectivity."""
    m = len(triangles)
    return TriangleMesh(
        vertices=vertices,
        triangles=triangles,
        object_ids=np.full(m, object_id, dtype=np.int64),
        reflectivity=np.full(m, reflectivity, dtype=np.float64),
    )


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray  # (3,) float64
    direction: np.ndarray  # (3,) unit float64
    max_range: float = 120.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {n}")
        if not self.max_range > 0.0:
            raise ValueError("max_range must be positive")


@dataclass(frozen=True)
class Hit:
    t: float
    point: np.ndarray  # (3,)
    normal: np.ndarray  # (3,) unit, facing the ray (normal . direction < 0)
    object_id: int
    reflectivity: float
    triangle_index: int  # index into the merged pre-build triangle order


@nb.njit(cache=True, error_model="numpy")
def _mt_intersect(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz,
                  t_max):
    """Moller-Trumbore; returns hit t in [T_EPSILON, t_max] or -1.0."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-14:
        return -1.0
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < T_EPSILON or t > t_max:
        return -1.0
    return t


@nb.njit(cache=True, error_model="numpy")
def _build_nodes(tri_lo, tri_hi, centroids):
    """Median-split build. Returns flat node arrays plus the leaf order.

    Nodes: bounds (nmin, nmax), children (left, right; -1 for leaves),
    leaf range (start, count) into ``order``.
    """
    m = tri_lo.shape[0]
    cap = 2 * m + 2
    nmin = np.empty((cap, 3), dtype=np.float64)
    nmax = np.empty((cap, 3), dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    order = np.arange(m, dtype=np.int64)
    if m == 0:
        return nmin[:0], nmax[:0], left[:0], right[:0], start[:0], count[:0], order

    n_nodes = 1
    stack = np.empty((64, 3), dtype=np.int64)  # (node, lo, hi)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        for k in range(3):
            bmin = np.inf
            bmax = -np.inf
            for i in range(lo, hi):
                tri = order[i]
                if tri_lo[tri, k] < bmin:
                    bmin = tri_lo[tri, k]
                if tri_hi[tri, k] > bmax:
                    bmax = tri_hi[tri, k]
            nmin[node, k] = bmin
            nmax[node, k] = bmax
        n = hi - lo
        if n <= LEAF_SIZE:
            start[node] = lo
            count[node] = n
            continue
        # Longest axis of the centroid bounds; fall back to a leaf when all
        # centroids coincide (split would not terminate).
        axis = 0
        best_ext = -1.0
        for k in range(3):
            cmin = np.inf
            cmax = -np.inf
            for i in range(lo, hi):
                c = centroids[order[i], k]
                if c < cmin:
                    cmin = c
                if c > cmax:
                    cmax = c
            ext = cmax - cmin
            if ext > best_ext:
                best_ext = ext
                axis = k
        if best_ext <= 0.0:
            start[node] = lo
            count[node] = n
            continue
        seg = order[lo:hi].copy()
        keys = np.empty(n, dtype=np.float64)
        for i in range(n):
            keys[i] = centroids[seg[i], axis]
        perm = np.argsort(keys, kind="mergesort")
        for i in range(n):
            order[lo + i] = seg[perm[i]]
        mid = lo + n // 2
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        stack[top, 0] = lchild
        stack[top, 1] = lo
        stack[top, 2] = mid
        top += 1
        stack[top, 0] = rchild
        stack[top, 1] = mid
        stack[top, 2] = hi
        top += 1
    return (nmin[:n_nodes], nmax[:n_nodes], left[:n_nodes], right[:n_nodes],
            start[:n_nodes], count[:n_nodes], order)


@nb.njit(cache=True, error_model="numpy", inline="always")
def _slab_entry(nmin, nmax, node, ox, oy, oz, dx, dy, dz, t_best):
    """Entry distance of the ray into the node box, or inf when it misses
    the interval [0, t_best]."""
    tmin = 0.0
    tmax = t_best
    if dx != 0.0:
        inv = 1.0 / dx
        t0 = (nmin[node, 0] - ox) * inv
        t1 = (nmax[node, 0] - ox) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
    elif ox < nmin[node, 0] or ox > nmax[node, 0]:
        return np.inf
    if dy != 0.0:
        inv = 1.0 / dy
        t0 = (nmin[node, 1] - oy) * inv
        t1 = (nmax[node, 1] - oy) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
    elif oy < nmin[node, 1] or oy > nmax[node, 1]:
        return np.inf
    if dz != 0.0:
        inv = 1.0 / dz
        t0 = (nmin[node, 2] - oz) * inv
        t1 = (nmax[node, 2] - oz) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
    elif oz < nmin[node, 2] or oz > nmax[node, 2]:
        return np.inf
    if tmin > tmax:
        return np.inf
    return tmin


@nb.njit(cache=True, error_model="numpy")
def _traverse(nmin, nmax, left, right, start, count, order, va, vb, vc,
              ox, oy, oz, dx, dy, dz, max_range):
    """Nearest hit of one ray; returns (t, original triangle index or -1)."""
    best_t = max_range
    best_tri = np.int64(-1)
    if nmin.shape[0] == 0:
        return best_t, best_tri
    stack = np.empty(64, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        # Non-strict prune: a node entered exactly at best_t may still hold
        # an equal-t triangle with a lower index (the edge tie rule).
        if _slab_entry(nmin, nmax, node, ox, oy, oz, dx, dy, dz, best_t) > best_t:
            continue
        if left[node] < 0:
            for i in range(start[node], start[node] + count[node]):
                tri = order[i]
                t = _mt_intersect(ox, oy, oz, dx, dy, dz,
                                  va[tri, 0], va[tri, 1], va[tri, 2],
                                  vb[tri, 0], vb[tri, 1], vb[tri, 2],
                                  vc[tri, 0], vc[tri, 1], vc[tri, 2], best_t)
                if t >= 0.0 and (t < best_t or (t == best_t and (best_tri < 0 or tri < best_tri))):
                    best_t = t
                    best_tri = tri
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    return best_t, best_tri


@nb.njit(cache=True, parallel=True, error_model="numpy")
def _traverse_batch(nmin, nmax, left, right, start, count, order, va, vb, vc,
                    origins, dirs, max_range, out_t, out_tri):
    for i in nb.prange(dirs.shape[0]):
        t, tri = _traverse(nmin, nmax, left, right, start, count, order,
                           va, vb, vc,
                           origins[i, 0], origins[i, 1], origins[i, 2],
                           dirs[i, 0], dirs[i, 1], dirs[i, 2], max_range)
        out_t[i] = t
        out_tri[i] = tri


def ray_triangle(ray: Ray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> Optional[float]:
    """Distance along ``ray`` to the triangle (v0, v1, v2), or None.

    Accepts t in (T_EPSILON, max_range]; edges and vertices count as hits
    (closed triangle).
    """
    o, d = ray.origin, ray.direction
    v0 = np.asarray(v0, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    t = _mt_intersect(o[0], o[1], o[2], d[0], d[1], d[2],
                      v0[0], v0[1], v0[2], v1[0], v1[1], v1[2],
                      v2[0], v2[1], v2[2], ray.max_range)
    return None if t < 0.0 else float(t)


class SpatialIndex:
    """Immutable BVH over the merged triangles of one frame's geometry.

    Queries are safe to run concurrently from any number of threads.
    """

    def __init__(self, meshes: Iterable[TriangleMesh]):
        verts_a = []
        verts_b = []
        verts_c = []
        oids = []
        rhos = []
        for mesh in meshes:
            if mesh.num_triangles == 0:
                continue
            verts_a.append(mesh.vertices[mesh.triangles[:, 0]])
            verts_b.append(mesh.vertices[mesh.triangles[:, 1]])
            verts_c.append(mesh.vertices[mesh.triangles[:, 2]])
            oids.append(mesh.object_ids)
            rhos.append(mesh.reflectivity)
        if verts_a:
            self.va = np.ascontiguousarray(np.concatenate(verts_a))
            self.vb = np.ascontiguousarray(np.concatenate(verts_b))
            self.vc = np.ascontiguousarray(np.concatenate(verts_c))
            self.tri_object_id = np.concatenate(oids)
            self.tri_reflectivity = np.concatenate(rhos)
        else:
            self.va = np.zeros((0, 3))
            self.vb = np.zeros((0, 3))
            self.vc = np.zeros((0, 3))
            self.tri_object_id = np.zeros(0, dtype=np.int64)
            self.tri_reflectivity = np.zeros(0)
        tri_lo = np.minimum(np.minimum(self.va, self.vb), self.vc)
        tri_hi = np.maximum(np.maximum(self.va, self.vb), self.vc)
        centroids = (self.va + self.vb + self.vc) / 3.0
        (self._nmin, self._nmax, self._left, self._right, self._start,
         self._count, self._order) = _build_nodes(tri_lo, tri_hi, centroids)
        # Geometric face normals, unit length, orientation as authored.
        n = np.cross(self.vb - self.va, self.vc - self.va)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        self.tri_normal = n / np.where(norm > 0.0, norm, 1.0)

    @property
    def num_triangles(self) -> int:
        return len(self.va)

    def cast(self, origins: np.ndarray, directions: np.ndarray,
             max_range: float) -> tuple[np.ndarray, np.ndarray]:
        """Batch nearest-hit query.

        origins may be a single (3,) point (broadcast) or (n, 3).
        Returns (t, triangle_index) with triangle_index = -1 for misses;
        t is meaningful only where triangle_index >= 0.
        """
        directions = np.ascontiguousarray(directions, dtype=np.float64)
        origins = np.asarray(origins, dtype=np.float64)
        if origins.ndim == 1:
            origins = np.broadcast_to(origins, directions.shape)
        origins = np.ascontiguousarray(origins)
        n = directions.shape[0]
        out_t = np.empty(n, dtype=np.float64)
        out_tri = np.empty(n, dtype=np.int64)
        _traverse_batch(self._nmin, self._nmax, self._left, self._right,
                        self._start, self._count, self._order,
                        self.va, self.vb, self.vc,
                        origins, directions, float(max_range), out_t, out_tri)
        return out_t, out_tri

    def intersect_nearest(self, ray: Ray) -> Optional[Hit]:
        """Nearest Hit along ``ray``, or None when nothing is in range."""
        t, tri = _traverse(self._nmin, self._nmax, self._left, self._right,
                           self._start, self._count, self._order,
                           self.va, self.vb, self.vc,
                           ray.origin[0], ray.origin[1], ray.origin[2],
                           ray.direction[0], ray.direction[1], ray.direction[2],
                           ray.max_range)
        if tri < 0:
            return None
        normal = self.tri_normal[tri]
        if float(np.dot(normal, ray.direction)) > 0.0:
            normal = -normal
        return Hit(
            t=float(t),
            point=ray.origin + t * ray.direction,
            normal=normal,
            object_id=int(self.tri_object_id[tri]),
            reflectivity=float(self.tri_reflectivity[tri]),
            triangle_index=int(tri),
        )

    def facing_normals(self, tri_idx: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Unit normals of the given triangles flipped to face the rays."""
        n = self.tri_normal[tri_idx]
        flip = np.einsum("ij,ij->i", n, directions) > 0.0
        n = np.where(flip[:, None], -n, n)
        return n


def build_index(meshes: Iterable[TriangleMesh]) -> SpatialIndex:
    """Build a SpatialIndex; empty geometry yields an always-miss index."""
    return SpatialIndex(meshes)


def warmup() -> None:
    """Force JIT compilation of the kernels on a one-triangle scene."""
    mesh = make_mesh(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
                     np.array([[0, 1, 2]]), 1, 0.5)
    idx = build_index([mesh])
    idx.cast(np.array([0.2, 0.2, 1.0]), np.array([[0.0, 0.0, -1.0]]), 10.0)
