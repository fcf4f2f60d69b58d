import math

import numpy as np
import pytest

from lidarsynth import geometry
from lidarsynth.raycast import make_mesh


def _areas(verts, tris):
    a = verts[tris[:, 0]]
    e1 = verts[tris[:, 1]] - a
    e2 = verts[tris[:, 2]] - a
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


@pytest.mark.parametrize("builder,args", [
    (geometry.box, ((1.0, 2.0, 3.0), (2.0, 1.0, 0.5), 0.3)),
    (geometry.capsule, (0.5, 0.1)),
    (geometry.sphere, (0.25,)),
    (geometry.vehicle, ((4.5, 1.8, 1.5),)),
    (geometry.pedestrian, ((0.45, 0.6, 1.7), 1.0, 0.5)),
    (geometry.ground_plane, (50.0,)),
])
def test_builders_produce_valid_meshes(builder, args):
    verts, tris = builder(*args)
    # make_mesh validates index ranges and degenerate triangles
    make_mesh(verts, tris, 1, 0.5)
    assert np.all(_areas(verts, tris) > 1e-12)


def test_box_extents():
    verts, _ = geometry.box((1.0, -2.0, 3.0), (4.0, 2.0, 1.0))
    assert np.allclose(verts.min(axis=0), [-1.0, -3.0, 2.5])
    assert np.allclose(verts.max(axis=0), [3.0, -1.0, 3.5])


def test_capsule_extents():
    verts, _ = geometry.capsule(0.8, 0.2)
    assert np.isclose(verts[:, 2].min(), -0.2)
    assert np.isclose(verts[:, 2].max(), 1.0)
    assert np.isclose(np.abs(verts[:, :2]).max(), 0.2)


def test_vehicle_compound_extents_and_cabin():
    dims = geometry.VEHICLE_DIMS["car"]
    verts, _ = geometry.vehicle(dims)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    assert np.allclose(lo, [-dims[0] / 2, -dims[1] / 2, 0.0])
    assert np.allclose(hi, [dims[0] / 2, dims[1] / 2, dims[2]])
    # above 60% height only the rear two-thirds remains
    top = verts[verts[:, 2] > 0.6 * dims[2] + 1e-9]
    assert np.isclose(top[:, 0].max(), dims[0] / 6)


def test_pedestrian_feet_on_ground_and_height():
    dims = geometry.PEDESTRIAN_DIMS["adult"]
    verts, _ = geometry.pedestrian(dims, 0.0, 0.5)
    assert np.isclose(verts[:, 2].min(), 0.0, atol=1e-9)
    assert np.isclose(verts[:, 2].max(), dims[2], atol=1e-9)
    assert np.isclose(np.abs(verts[:, 1]).max(), dims[1] / 2, atol=1e-9)


def test_pedestrian_halfphase_mirror():
    """Advancing the gait by pi mirrors the body about the torso plane."""
    dims = geometry.PEDESTRIAN_DIMS["adult"]
    for phase in (0.0, 0.7, math.pi / 2):
        a, _ = geometry.pedestrian(dims, phase, 0.5)
        b, _ = geometry.pedestrian(dims, phase + math.pi, 0.5)
        b_mirrored = b * np.array([1.0, -1.0, 1.0])
        sa = np.array(sorted(map(tuple, np.round(a, 9))))
        sb = np.array(sorted(map(tuple, np.round(b_mirrored, 9))))
        assert np.allclose(sa, sb, atol=1e-9)


def test_pedestrian_swing_moves_feet():
    dims = geometry.PEDESTRIAN_DIMS["adult"]
    straight, _ = geometry.pedestrian(dims, 0.0, 0.5)
    swung, _ = geometry.pedestrian(dims, math.pi / 2, 0.5)
    assert swung[:, 0].max() > straight[:, 0].max() + 0.1
    assert swung[:, 2].min() > -1e-9  # swing never pushes a foot underground


def test_child_dims_are_scaled_adult():
    adult = geometry.PEDESTRIAN_DIMS["adult"]
    child = geometry.PEDESTRIAN_DIMS["child"]
    assert np.allclose(np.array(child), 0.65 * np.array(adult))


def test_rot_z_quarter_turn():
    v = np.array([[1.0, 0.0, 2.0]])
    out = geometry.rot_z(v, math.pi / 2)
    assert np.allclose(out, [[0.0, 1.0, 2.0]], atol=1e-12)
