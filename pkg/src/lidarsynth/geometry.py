"""Procedural triangle meshes for scene objects.

Vehicles are two-box compounds (full-footprint body plus a cabin over the
rear two thirds starting at 60% height), pedestrians are capsule compounds
(torso, sphere head, two arms, two legs) with sinusoidal limb swing.
Object canonical frame: +x forward, +y left, +z up, origin at the ground
point under the object center.
"""

from __future__ import annotations

import math

import numpy as np

# Capsule/sphere tessellation (fixed so geometry is bit-reproducible).
CAPSULE_SEGMENTS = 8
CAPSULE_CAP_RINGS = 2
SPHERE_SEGMENTS = 8
SPHERE_RINGS = 6

VEHICLE_DIMS = {
    "car": (4.5, 1.8, 1.5),
    "suv": (4.8, 1.9, 1.8),
    "bus": (12.0, 2.5, 3.2),
    "truck": (8.0, 2.5, 3.5),
}
PEDESTRIAN_DIMS = {
    "adult": (0.45, 0.60, 1.70),
    "child": (0.45 * 0.65, 0.60 * 0.65, 1.70 * 0.65),
}
# (frequency Hz, limb amplitude rad)
GAIT_PRESETS = {"walk": (1.8, 0.5), "run": (2.8, 0.9)}
ARM_SWING_FACTOR = 0.7  # arms swing less than legs


def rot_z(vertices: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    out = np.empty_like(vertices)
    out[:, 0] = c * vertices[:, 0] - s * vertices[:, 1]
    out[:, 1] = s * vertices[:, 0] + c * vertices[:, 1]
    out[:, 2] = vertices[:, 2]
    return out


def rot_y(vertices: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    out = np.empty_like(vertices)
    out[:, 0] = c * vertices[:, 0] + s * vertices[:, 2]
    out[:, 1] = vertices[:, 1]
    out[:, 2] = -s * vertices[:, 0] + c * vertices[:, 2]
    return out


def box(center, dims, yaw: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Axis box of (length, width, height) about ``center``, rotated by yaw."""
    l, w, h = dims
    hx, hy, hz = l / 2.0, w / 2.0, h / 2.0
    v = np.array([
        [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
        [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
    ])
    tris = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom (-z)
        [4, 5, 6], [4, 6, 7],  # top (+z)
        [0, 1, 5], [0, 5, 4],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [1, 2, 6], [1, 6, 5],  # +x
        [3, 0, 4], [3, 4, 7],  # -x
    ], dtype=np.int64)
    if yaw != 0.0:
        v = rot_z(v, yaw)
    return v + np.asarray(center, dtype=np.float64), tris


def _lathe(profile: list[tuple[float, float]], segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Surface of revolution about +z.

    ``profile`` is a list of (radius, z) circles from bottom to top; a zero
    radius entry becomes a single pole vertex. Adjacent circles are joined
    by quads (two triangles), poles by fans.
    """
    angles = 2.0 * np.pi * np.arange(segments) / segments
    ca, sa = np.cos(angles), np.sin(angles)
    verts: list[np.ndarray] = []
    ring_start: list[int] = []  # vertex index of each profile row (-1 size marker via radius)
    is_pole: list[bool] = []
    for radius, z in profile:
        if radius == 0.0:
            ring_start.append(len(verts))
            is_pole.append(True)
            verts.append(np.array([0.0, 0.0, z]))
        else:
            ring_start.append(len(verts))
            is_pole.append(False)
            for k in range(segments):
                verts.append(np.array([radius * ca[k], radius * sa[k], z]))
    tris: list[list[int]] = []
    for i in range(len(profile) - 1):
        lo, hi = ring_start[i], ring_start[i + 1]
        if is_pole[i] and is_pole[i + 1]:
            raise ValueError("profile needs at least one non-pole circle between poles")
        if is_pole[i]:
            for k in range(segments):
                tris.append([lo, hi + (k + 1) % segments, hi + k])
        elif is_pole[i + 1]:
            for k in range(segments):
                tris.append([lo + k, lo + (k + 1) % segments, hi])
        else:
            for k in range(segments):
                k2 = (k + 1) % segments
                tris.append([lo + k, lo + k2, hi + k2])
                tris.append([lo + k, hi + k2, hi + k])
    return np.array(verts), np.array(tris, dtype=np.int64)


def capsule(length: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Capsule along +z with cap centers at z = 0 and z = length.

    Total extent is z in [-radius, length + radius].
    """
    if length <= 0.0:
        raise ValueError("capsule length must be positive")
    profile: list[tuple[float, float]] = [(0.0, -radius)]
    for k in range(1, CAPSULE_CAP_RINGS + 1):
        lat = 0.5 * math.pi * (k / CAPSULE_CAP_RINGS - 1.0)
        profile.append((radius * math.cos(lat), radius * math.sin(lat)))
    for k in range(CAPSULE_CAP_RINGS):
        lat = 0.5 * math.pi * k / CAPSULE_CAP_RINGS
        profile.append((radius * math.cos(lat), length + radius * math.sin(lat)))
    profile.append((0.0, length + radius))
    return _lathe(profile, CAPSULE_SEGMENTS)


def sphere(radius: float) -> tuple[np.ndarray, np.ndarray]:
    """UV sphere centered at the origin."""
    profile: list[tuple[float, float]] = [(0.0, -radius)]
    for k in range(1, SPHERE_RINGS):
        lat = -0.5 * math.pi + math.pi * k / SPHERE_RINGS
        profile.append((radius * math.cos(lat), radius * math.sin(lat)))
    profile.append((0.0, radius))
    return _lathe(profile, SPHERE_SEGMENTS)


def _merge(parts: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    verts = []
    tris = []
    offset = 0
    for v, t in parts:
        verts.append(v)
        tris.append(t + offset)
        offset += len(v)
    return np.concatenate(verts), np.concatenate(tris)


def vehicle(dims) -> tuple[np.ndarray, np.ndarray]:
    """Two-box vehicle compound in the canonical frame, base on z = 0."""
    l, w, h = dims
    body = box((0.0, 0.0, 0.3 * h), (l, w, 0.6 * h))
    cabin = box((-l / 6.0, 0.0, 0.8 * h), (2.0 * l / 3.0, w, 0.4 * h))
    return _merge([body, cabin])


def pedestrian(dims, gait_phase: float, amplitude: float) -> tuple[np.ndarray, np.ndarray]:
    """Capsule-compound pedestrian, feet on z = 0 at zero swing.

    Legs swing about the hips by amplitude * sin(phase), arms about the
    shoulders in antiphase with the same-side leg; left/right limbs are in
    antiphase with each other.
    """
    l, w, h = dims
    torso_r = 0.5 * min(l, 0.6 * w)
    arm_r = 0.25 * torso_r
    leg_r = 0.4 * torso_r
    hip_z = 0.50 * h
    shoulder_z = 0.80 * h
    head_r = 0.10 * h
    leg_seg = hip_z - leg_r  # foot cap touches the ground at zero swing
    arm_seg = 0.30 * h
    leg_y = 0.55 * torso_r
    arm_y = w / 2.0 - arm_r

    swing_leg = amplitude * math.sin(gait_phase)
    swing_arm = ARM_SWING_FACTOR * amplitude * math.sin(gait_phase)

    def limb(seg_len: float, radius: float, pivot_y: float, pivot_z: float,
             swing: float) -> tuple[np.ndarray, np.ndarray]:
        v, t = capsule(seg_len, radius)
        v = v.copy()
        v[:, 2] = -v[:, 2]  # hang downward from the pivot
        v = rot_y(v, swing)
        v[:, 1] += pivot_y
        v[:, 2] += pivot_z
        return v, t

    torso_v, torso_t = capsule(shoulder_z - hip_z, torso_r)
    torso_v = torso_v.copy()
    torso_v[:, 2] += hip_z
    head_v, head_t = sphere(head_r)
    head_v = head_v.copy()
    head_v[:, 2] += h - head_r

    parts = [
        (torso_v, torso_t),
        (head_v, head_t),
        limb(leg_seg, leg_r, +leg_y, hip_z, swing_leg),   # left leg
        limb(leg_seg, leg_r, -leg_y, hip_z, -swing_leg),  # right leg
        limb(arm_seg, arm_r, +arm_y, shoulder_z, -swing_arm),  # left arm
        limb(arm_seg, arm_r, -arm_y, shoulder_z, swing_arm),   # right arm
    ]
    return _merge(parts)


def ground_plane(half_extent: float) -> tuple[np.ndarray, np.ndarray]:
    """Square z = 0 quad covering [-half_extent, half_extent]^2."""
    e = float(half_extent)
    v = np.array([[-e, -e, 0.0], [e, -e, 0.0], [e, e, 0.0], [-e, e, 0.0]])
    t = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    return v, t
