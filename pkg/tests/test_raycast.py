import numpy as np
import pytest

from lidarsynth.raycast import (Ray, T_EPSILON, TriangleMesh, build_index,
                                make_mesh, ray_triangle)

from oracles import brute_force_nearest


def _floor_triangle(z=0.0, size=5.0):
    verts = np.array([[-size, -size, z], [size, -size, z], [0.0, size, z]])
    return verts, np.array([[0, 1, 2]], dtype=np.int64)


def _random_soup(rng, n_tris, span=20.0, tri_size=1.5):
    anchors = rng.uniform(-span, span, (n_tris, 3))
    offsets = rng.uniform(-tri_size, tri_size, (n_tris, 2, 3))
    verts = np.concatenate([anchors[:, None, :],
                            anchors[:, None, :] + offsets], axis=1).reshape(-1, 3)
    tris = np.arange(3 * n_tris, dtype=np.int64).reshape(-1, 3)
    areas = 0.5 * np.linalg.norm(
        np.cross(verts[tris[:, 1]] - verts[tris[:, 0]],
                 verts[tris[:, 2]] - verts[tris[:, 0]]), axis=1)
    keep = areas > 1e-6
    tris = tris[keep]
    return make_mesh(verts, tris, 1, 0.5)


def _random_rays(rng, n, span=25.0):
    origins = rng.uniform(-span, span, (n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


# --- ray_triangle ----------------------------------------------------------

def test_ray_triangle_straight_down():
    verts, _ = _floor_triangle()
    ray = Ray(origin=np.array([0.0, 0.0, 10.0]), direction=np.array([0.0, 0.0, -1.0]),
              max_range=100.0)
    t = ray_triangle(ray, verts[0], verts[1], verts[2])
    assert t == pytest.approx(10.0, abs=1e-12)


def test_ray_triangle_behind_origin():
    verts, _ = _floor_triangle(z=20.0)
    ray = Ray(origin=np.array([0.0, 0.0, 10.0]), direction=np.array([0.0, 0.0, -1.0]),
              max_range=100.0)
    assert ray_triangle(ray, verts[0], verts[1], verts[2]) is None


def test_ray_direction_must_be_unit():
    with pytest.raises(ValueError, match="unit length"):
        Ray(origin=np.zeros(3), direction=np.array([0.0, 0.0, -2.0]))


def test_shared_edge_counts_once_lowest_index():
    # Two triangles in z=0 sharing the edge x=0; ray passes exactly
    # through the shared edge.
    verts = np.array([
        [0.0, -1.0, 0.0], [0.0, 1.0, 0.0],   # shared edge on the y axis
        [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0],
    ])
    tris = np.array([[0, 1, 2], [0, 3, 1]], dtype=np.int64)
    mesh = make_mesh(verts, tris, 7, 0.5)
    index = build_index([mesh])
    ray = Ray(origin=np.array([0.0, 0.0, 10.0]), direction=np.array([0.0, 0.0, -1.0]),
              max_range=100.0)
    # both triangles intersect at t=10
    assert ray_triangle(ray, verts[0], verts[1], verts[2]) == pytest.approx(10.0)
    assert ray_triangle(ray, verts[0], verts[3], verts[1]) == pytest.approx(10.0)
    hit = index.intersect_nearest(ray)
    assert hit is not None
    assert hit.triangle_index == 0  # tie resolved to the lowest index
    t, tri = brute_force_nearest(ray.origin, ray.direction, ray.max_range,
                                 index.va, index.vb, index.vc)
    assert tri == 0 and t == hit.t


# --- index construction ----------------------------------------------------

def test_empty_index_always_misses():
    index = build_index([])
    ray = Ray(origin=np.zeros(3), direction=np.array([1.0, 0.0, 0.0]))
    assert index.intersect_nearest(ray) is None
    t, tri = index.cast(np.zeros(3), np.array([[1.0, 0.0, 0.0]]), 10.0)
    assert tri[0] == -1


def test_single_triangle_index_equals_ray_triangle():
    verts, tris = _floor_triangle()
    mesh = make_mesh(verts, tris, 3, 0.9)
    index = build_index([mesh])
    rng = np.random.default_rng(0)
    for _ in range(50):
        o = rng.uniform(-6, 6, 3) + np.array([0, 0, 8.0])
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        ray = Ray(origin=o, direction=d, max_range=50.0)
        expected = ray_triangle(ray, verts[0], verts[1], verts[2])
        hit = index.intersect_nearest(ray)
        if expected is None:
            assert hit is None
        else:
            assert hit is not None
            assert hit.t == pytest.approx(expected, abs=1e-12)
            assert hit.object_id == 3
            assert hit.reflectivity == 0.9


def test_nearest_of_two_walls():
    lo_v, lo_t = _floor_triangle(z=-5.0, size=50.0)
    hi_v, hi_t = _floor_triangle(z=0.0, size=50.0)
    index = build_index([make_mesh(hi_v, hi_t, 1, 0.5),
                         make_mesh(lo_v, lo_t, 2, 0.5)])
    ray = Ray(origin=np.array([0.0, 0.0, 10.0]), direction=np.array([0.0, 0.0, -1.0]),
              max_range=100.0)
    hit = index.intersect_nearest(ray)
    assert hit.t == pytest.approx(10.0)
    assert hit.object_id == 1


def test_max_range_gate():
    verts, tris = _floor_triangle(z=0.0, size=50.0)
    index = build_index([make_mesh(verts, tris, 1, 0.5)])
    ray = Ray(origin=np.array([0.0, 0.0, 10.0]), direction=np.array([0.0, 0.0, -1.0]),
              max_range=5.0)
    assert index.intersect_nearest(ray) is None


# --- oracle equivalence ----------------------------------------------------

def test_bvh_equals_brute_force_random_soup():
    rng = np.random.default_rng(1234)
    mesh = _random_soup(rng, 2000)
    index = build_index([mesh])
    origins, dirs = _random_rays(rng, 300)
    t, tri = index.cast(origins, dirs, 60.0)
    for i in range(len(dirs)):
        bt, btri = brute_force_nearest(origins[i], dirs[i], 60.0,
                                       index.va, index.vb, index.vc)
        if btri < 0:
            assert tri[i] == -1
        else:
            assert tri[i] == btri
            assert abs(t[i] - bt) < 1e-9


def test_hit_invariants_random():
    rng = np.random.default_rng(99)
    mesh = _random_soup(rng, 500)
    index = build_index([mesh])
    origins = rng.uniform(-25, 25, (200, 3))
    targets = rng.uniform(-15, 15, (200, 3))
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    hits = 0
    for i in range(len(dirs)):
        ray = Ray(origin=origins[i], direction=dirs[i], max_range=80.0)
        hit = index.intersect_nearest(ray)
        if hit is None:
            continue
        hits += 1
        assert T_EPSILON < hit.t <= 80.0
        assert float(np.dot(hit.normal, ray.direction)) < 0.0
        assert np.linalg.norm(hit.point - (ray.origin + hit.t * ray.direction)) < 1e-9
        assert abs(np.linalg.norm(hit.normal) - 1.0) < 1e-9
    assert hits > 20  # the soup is dense enough for the test to be meaningful


def test_occlusion_monotonicity():
    """Adding geometry never increases any ray's hit distance."""
    rng = np.random.default_rng(7)
    base = _random_soup(rng, 400)
    extra = _random_soup(rng, 400)
    index_base = build_index([base])
    index_both = build_index([base, extra])
    origins, dirs = _random_rays(rng, 200)
    t0, tri0 = index_base.cast(origins, dirs, 70.0)
    t1, tri1 = index_both.cast(origins, dirs, 70.0)
    for i in range(len(dirs)):
        if tri0[i] >= 0:
            assert tri1[i] >= 0
            assert t1[i] <= t0[i] + 1e-12


def test_mesh_validation():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="out of range"):
        TriangleMesh(verts, np.array([[0, 1, 3]]), np.array([1]), np.array([0.5]))
    with pytest.raises(ValueError, match="degenerate"):
        TriangleMesh(verts, np.array([[0, 1, 1]]), np.array([1]), np.array([0.5]))
