"""Elevated spinning-LiDAR simulation.

Each sensor emits a fixed ray pattern per frame (channel-major, azimuth
ascending), rays are cast into the frame's merged geometry, and range
noise / dropout / intensity are applied per ray from counter-based random
streams keyed by (seed, frame_index, sensor_id, ray_index). Nothing is
drawn from shared sequential state, so output is bit-identical for any
thread count or frame order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import rng
from .raycast import SpatialIndex, build_index

# Reserved object ids in point attribution.
GROUND_ID = 0
PROP_ID = -1
UNKNOWN_ID = -2  # decoded frames without an id sidecar

DEFAULT_CHANNELS = 64
DEFAULT_ELEVATION_SPAN = (-math.pi / 4.0, 0.0)  # downward view from the mount
DEFAULT_AZIMUTH_STEPS = 1024
DEFAULT_MAX_RANGE = 120.0
DEFAULT_RANGE_SIGMA = 0.02
DEFAULT_DROPOUT = 0.02
DEFAULT_MOUNT_HEIGHT = 5.0


def uniform_channels(count: int = DEFAULT_CHANNELS,
                     lo: float = DEFAULT_ELEVATION_SPAN[0],
                     hi: float = DEFAULT_ELEVATION_SPAN[1]) -> tuple[float, ...]:
    """``count`` elevation angles spanning [lo, hi] inclusive, ascending."""
    if count == 1:
        return (float(lo),)
    return tuple(lo + (hi - lo) * k / (count - 1) for k in range(count))


@dataclass(frozen=True)
class SensorModel:
    sensor_id: int
    position: tuple[float, float, float] = (0.0, 0.0, DEFAULT_MOUNT_HEIGHT)
    yaw: float = 0.0
    pitch: float = 0.0  # positive pitch tilts the forward axis downward
    channels: tuple[float, ...] = field(default_factory=uniform_channels)
    azimuth_steps: int = DEFAULT_AZIMUTH_STEPS
    max_range: float = DEFAULT_MAX_RANGE
    range_noise_sigma: float = DEFAULT_RANGE_SIGMA
    dropout_prob: float = DEFAULT_DROPOUT
    intensity_exponent: int = 0  # 0 (off) or 2 (inverse-square falloff)

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValueError("sensor needs at least one channel")
        if any(b <= a for a, b in zip(self.channels, self.channels[1:])):
            raise ValueError("channel elevations must be strictly ascending")
        if self.azimuth_steps < 1:
            raise ValueError("azimuth_steps must be >= 1")
        if not self.max_range > 0.0:
            raise ValueError("max_range must be positive")
        if self.range_noise_sigma < 0.0:
            raise ValueError("range_noise_sigma must be >= 0")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")
        if self.intensity_exponent not in (0, 2):
            raise ValueError("intensity_exponent must be 0 or 2")

    @property
    def rays_per_frame(self) -> int:
        return len(self.channels) * self.azimuth_steps


@dataclass
class PointCloudFrame:
    """One timestamped sweep, struct-of-arrays.

    positions (n, 3) float64 world frame, intensity (n,) in [0, 1],
    object_ids (n,) source-surface attribution, sensor_ids / channels /
    azimuths (n,) provenance (-1 where unknown, e.g. after decoding).
    """

    frame_index: int
    timestamp: float
    positions: np.ndarray
    intensity: np.ndarray
    object_ids: np.ndarray
    sensor_ids: np.ndarray
    channels: np.ndarray
    azimuths: np.ndarray

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(n)
        self.object_ids = np.asarray(self.object_ids, dtype=np.int64).reshape(n)
        self.sensor_ids = np.asarray(self.sensor_ids, dtype=np.int64).reshape(n)
        self.channels = np.asarray(self.channels, dtype=np.int64).reshape(n)
        self.azimuths = np.asarray(self.azimuths, dtype=np.int64).reshape(n)

    @property
    def num_points(self) -> int:
        return len(self.positions)


def empty_frame(frame_index: int, timestamp: float) -> PointCloudFrame:
    z = np.zeros(0)
    return PointCloudFrame(frame_index, timestamp, np.zeros((0, 3)), z,
                           z.astype(np.int64), z.astype(np.int64),
                           z.astype(np.int64), z.astype(np.int64))


def mount_rotation(sensor: SensorModel) -> np.ndarray:
    """World-from-sensor rotation: Rz(yaw) @ Ry(pitch)."""
    cy, sy = math.cos(sensor.yaw), math.sin(sensor.yaw)
    cp, sp = math.cos(sensor.pitch), math.sin(sensor.pitch)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    return rz @ ry


def generate_rays(sensor: SensorModel) -> np.ndarray:
    """Unit ray directions, shape (channels * azimuth_steps, 3).

    Channel-major, azimuth ascending: ray k = c * azimuth_steps + a has
    elevation channels[c] and azimuth 2*pi*a/azimuth_steps, rotated by the
    mount. All rays share the sensor position as origin.
    """
    elev = np.asarray(sensor.channels, dtype=np.float64)
    az = 2.0 * np.pi * np.arange(sensor.azimuth_steps, dtype=np.float64) / sensor.azimuth_steps
    ce, se = np.cos(elev), np.sin(elev)
    ca, sa = np.cos(az), np.sin(az)
    dirs = np.empty((len(elev), sensor.azimuth_steps, 3))
    dirs[:, :, 0] = ce[:, None] * ca[None, :]
    dirs[:, :, 1] = ce[:, None] * sa[None, :]
    dirs[:, :, 2] = se[:, None] * np.ones_like(ca)[None, :]
    dirs = dirs.reshape(-1, 3)
    if sensor.yaw != 0.0 or sensor.pitch != 0.0:
        dirs = dirs @ mount_rotation(sensor).T
    return dirs


def simulate_frame(index: SpatialIndex, sensors: Sequence[SensorModel],
                   frame_index: int, frame_rate: float, seed: int) -> PointCloudFrame:
    """Cast every sensor's rays into ``index`` and apply the return model.

    Per hit ray, with probability (1 - dropout_prob), emits a point at
    origin + (t + eta) * direction with eta ~ N(0, sigma^2), intensity
    rho * cos(incidence) * (1 m / t)^exponent clipped to [0, 1].
    """
    parts = []
    for sensor in sensors:
        dirs = generate_rays(sensor)
        origin = np.asarray(sensor.position, dtype=np.float64)
        t, tri = index.cast(origin, dirs, sensor.max_range)
        hit = tri >= 0

        n_rays = len(dirs)
        base = rng.stream_key(seed, frame_index, sensor.sensor_id)
        keys = rng.substreams(base, np.arange(n_rays))
        keep = hit & (rng.uniforms(keys, 0) >= sensor.dropout_prob)
        if not np.any(keep):
            continue
        eta = sensor.range_noise_sigma * rng.normals(keys, 1)

        kt = t[keep]
        kd = dirs[keep]
        ktri = tri[keep]
        positions = origin[None, :] + (kt + eta[keep])[:, None] * kd
        normals = index.facing_normals(ktri, kd)
        cos_inc = np.maximum(0.0, -np.einsum("ij,ij->i", kd, normals))
        intensity = index.tri_reflectivity[ktri] * cos_inc
        if sensor.intensity_exponent:
            intensity = intensity * (1.0 / kt) ** sensor.intensity_exponent
        np.clip(intensity, 0.0, 1.0, out=intensity)

        ray_idx = np.nonzero(keep)[0]
        parts.append((
            positions, intensity, index.tri_object_id[ktri],
            np.full(len(ray_idx), sensor.sensor_id, dtype=np.int64),
            ray_idx // sensor.azimuth_steps,
            ray_idx % sensor.azimuth_steps,
        ))

    timestamp = frame_index / frame_rate
    if not parts:
        return empty_frame(frame_index, timestamp)
    return PointCloudFrame(
        frame_index=frame_index,
        timestamp=timestamp,
        positions=np.concatenate([p[0] for p in parts]),
        intensity=np.concatenate([p[1] for p in parts]),
        object_ids=np.concatenate([p[2] for p in parts]),
        sensor_ids=np.concatenate([p[3] for p in parts]),
        channels=np.concatenate([p[4] for p in parts]),
        azimuths=np.concatenate([p[5] for p in parts]),
    )


def simulate_scene(scene) -> Iterator[PointCloudFrame]:
    """Yield one PointCloudFrame per frame index, lazily (frames are large)."""
    from .scene import geometry_at  # deferred: scene module builds on sensor types

    for frame_index in range(scene.frame_count):
        meshes = [mesh for _, mesh in geometry_at(scene, frame_index)]
        index = build_index(meshes)
        yield simulate_frame(index, scene.sensors, frame_index,
                             scene.frame_rate, scene.seed)
