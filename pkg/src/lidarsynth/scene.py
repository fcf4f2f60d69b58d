"""Declarative scene model: keyframed objects, sensors, and frame geometry.

A scene is described by a line-oriented config document (see parse_scene)
or built programmatically from the dataclasses below. All angles are
radians, lengths are meters, the world frame is right-handed with z up.
SceneConfig and everything derived from it are immutable after
construction, so frames can be instantiated concurrently.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .raycast import TriangleMesh, make_mesh
from .sensor import GROUND_ID, PROP_ID, SensorModel, uniform_channels

VEHICLE = "vehicle"
PEDESTRIAN = "pedestrian"
CLASS_LABELS = (VEHICLE, PEDESTRIAN)

DEFAULT_REFLECTIVITY = 0.5
DEFAULT_GROUND_REFLECTIVITY = 0.2
DEFAULT_GROUND_EXTENT = 150.0


class SceneParseError(ValueError):
    """Malformed scene document; carries the 1-based source line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SceneValidationError(ValueError):
    """Structurally valid document with inconsistent content."""


def wrap_angle(angle: float) -> float:
    """Wrap to [-pi, pi)."""
    return (float(angle) + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    yaw: float  # radians, normalized to [-pi, pi)

    def __post_init__(self) -> None:
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3:
            raise SceneValidationError("pose position must have 3 components")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))
        if not all(math.isfinite(v) for v in pos):
            raise SceneValidationError("pose position must be finite")


@dataclass(frozen=True)
class Keyframe:
    time: float
    pose: Pose

    def __post_init__(self) -> None:
        if not math.isfinite(self.time):
            raise SceneValidationError("keyframe time must be finite")


@dataclass(frozen=True)
class Trajectory:
    keyframes: tuple[Keyframe, ...]

    def __post_init__(self) -> None:
        if not self.keyframes:
            raise SceneValidationError("trajectory needs at least one keyframe")
        times = [k.time for k in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SceneValidationError("keyframe times must be strictly increasing")


def pose_at(traj: Trajectory, t: float) -> Pose:
    """Pose at time t: linear position, shortest-arc yaw, clamped ends."""
    kfs = traj.keyframes
    if t <= kfs[0].time:
        return kfs[0].pose
    if t >= kfs[-1].time:
        return kfs[-1].pose
    times = [k.time for k in kfs]
    i1 = bisect_right(times, t)
    k0, k1 = kfs[i1 - 1], kfs[i1]
    u = (t - k0.time) / (k1.time - k0.time)
    p0 = np.asarray(k0.pose.position)
    p1 = np.asarray(k1.pose.position)
    position = p0 + u * (p1 - p0)
    yaw = k0.pose.yaw + u * wrap_angle(k1.pose.yaw - k0.pose.yaw)
    return Pose(position=tuple(position), yaw=yaw)


@dataclass(frozen=True)
class ObjectSpec:
    object_id: int
    class_label: str  # VEHICLE or PEDESTRIAN
    subtype: str
    dims: tuple[float, float, float]  # (length, width, height)
    reflectivity: float
    trajectory: Trajectory
    gait: Optional[tuple[float, float]] = None  # (frequency Hz, amplitude rad)

    def __post_init__(self) -> None:
        if self.object_id < 1:
            raise SceneValidationError(
                f"object_id must be >= 1 (0 and -1 are reserved), got {self.object_id}")
        if self.class_label not in CLASS_LABELS:
            raise SceneValidationError(f"unknown class {self.class_label!r}")
        subtypes = geometry.VEHICLE_DIMS if self.class_label == VEHICLE else geometry.PEDESTRIAN_DIMS
        if self.subtype not in subtypes:
            raise SceneValidationError(
                f"unknown {self.class_label} subtype {self.subtype!r}")
        if any(d <= 0.0 for d in self.dims):
            raise SceneValidationError(f"object {self.object_id}: dims must be positive")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise SceneValidationError(
                f"object {self.object_id}: reflectivity must lie in [0, 1]")
        if self.class_label == PEDESTRIAN:
            if self.gait is None:
                object.__setattr__(self, "gait", geometry.GAIT_PRESETS["walk"])
            freq, amp = self.gait
            if freq <= 0.0 or amp < 0.0:
                raise SceneValidationError(
                    f"object {self.object_id}: gait must have frequency > 0, amplitude >= 0")
        elif self.gait is not None:
            raise SceneValidationError(
                f"object {self.object_id}: gait applies to pedestrians only")


@dataclass(frozen=True)
class StaticProp:
    """Fixed box obstacle (kiosk, bin, pole segment...)."""

    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float = 0.0
    reflectivity: float = DEFAULT_REFLECTIVITY

    def __post_init__(self) -> None:
        if any(d <= 0.0 for d in self.dims):
            raise SceneValidationError("prop dims must be positive")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise SceneValidationError("prop reflectivity must lie in [0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    name: str
    duration: float
    frame_rate: float
    objects: tuple[ObjectSpec, ...]
    sensors: tuple[SensorModel, ...]
    ground_reflectivity: float = DEFAULT_GROUND_REFLECTIVITY
    ground_extent: float = DEFAULT_GROUND_EXTENT
    static_props: tuple[StaticProp, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.duration > 0.0:
            raise SceneValidationError("duration must be positive")
        if not self.frame_rate > 0.0:
            raise SceneValidationError("frame_rate must be positive")
        if self.frame_count < 1:
            raise SceneValidationError("scene must span at least one frame")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            dup = sorted(i for i in set(ids) if ids.count(i) > 1)
            raise SceneValidationError(f"duplicate object_id {dup[0]}")
        sids = [s.sensor_id for s in self.sensors]
        if len(set(sids)) != len(sids):
            raise SceneValidationError("duplicate sensor_id")
        if not 0.0 <= self.ground_reflectivity <= 1.0:
            raise SceneValidationError("ground_reflectivity must lie in [0, 1]")
        if not self.ground_extent > 0.0:
            raise SceneValidationError("ground_extent must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise SceneValidationError("seed must be a 64-bit unsigned integer")

    @property
    def frame_count(self) -> int:
        # Tiny slack so e.g. 0.3 s at 10 Hz (float product 2.9999...) is 3.
        return int(math.floor(self.duration * self.frame_rate + 1e-9))


def object_mesh(spec: ObjectSpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Canonical-frame mesh of the object at scene time t (gait applied)."""
    if spec.class_label == VEHICLE:
        return geometry.vehicle(spec.dims)
    freq, amp = spec.gait
    phase = 2.0 * math.pi * freq * t
    return geometry.pedestrian(spec.dims, phase, amp)


def geometry_at(scene: SceneConfig, frame_index: int) -> list[tuple[int, TriangleMesh]]:
    """Instantiated frame geometry as (object_id, mesh) pairs.

    Ground comes first (id 0), then static props (id -1), then dynamic
    objects in scene order. Deterministic: identical inputs give bit-exact
    vertex data.
    """
    if not 0 <= frame_index < scene.frame_count:
        raise IndexError(
            f"frame_index {frame_index} out of range [0, {scene.frame_count})")
    t = frame_index / scene.frame_rate
    out: list[tuple[int, TriangleMesh]] = []

    gv, gt = geometry.ground_plane(scene.ground_extent)
    out.append((GROUND_ID, make_mesh(gv, gt, GROUND_ID, scene.ground_reflectivity)))
    for prop in scene.static_props:
        pv, pt = geometry.box(prop.center, prop.dims, prop.yaw)
        out.append((PROP_ID, make_mesh(pv, pt, PROP_ID, prop.reflectivity)))
    for spec in scene.objects:
        verts, tris = object_mesh(spec, t)
        pose = pose_at(spec.trajectory, t)
        verts = geometry.rot_z(verts, pose.yaw) + np.asarray(pose.position)[None, :]
        out.append((spec.object_id, make_mesh(verts, tris, spec.object_id,
                                              spec.reflectivity)))
    return out


# --------------------------------------------------------------------------
# Scene config document
#
# Line-oriented, one statement per line, '#' starts a comment. Scalars at
# top level, repeated "object { ... }", "sensor { ... }" and "prop { ... }"
# blocks. All angles radians, all lengths meters. Omitted keys fall back
# to documented defaults. See README for the full grammar.
# --------------------------------------------------------------------------

_VEHICLE_SUBTYPES = tuple(geometry.VEHICLE_DIMS)
_PEDESTRIAN_SUBTYPES = tuple(geometry.PEDESTRIAN_DIMS)


def _to_float(tok: str, line: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SceneParseError(line, f"expected a number for {what}, got {tok!r}") from None
    if not math.isfinite(v):
        raise SceneParseError(line, f"{what} must be finite")
    return v


def _to_int(tok: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise SceneParseError(line, f"expected an integer for {what}, got {tok!r}") from None


def _need(args: list[str], n: int, line: int, what: str) -> None:
    if len(args) != n:
        raise SceneParseError(line, f"{what} takes {n} value(s), got {len(args)}")


class _BlockReader:
    """Splits the document into top-level statements and brace blocks."""

    def __init__(self, text: str):
        self.statements: list[tuple[int, list[str]]] = []
        self.blocks: list[tuple[str, int, list[tuple[int, list[str]]]]] = []
        current: Optional[list[tuple[int, list[str]]]] = None
        kind = ""
        opened_at = 0
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if tokens[-1] == "{":
                if current is not None:
                    raise SceneParseError(lineno, "nested blocks are not allowed")
                if len(tokens) != 2 or tokens[0] not in ("object", "sensor", "prop"):
                    raise SceneParseError(
                        lineno, "expected 'object {', 'sensor {' or 'prop {'")
                kind = tokens[0]
                opened_at = lineno
                current = []
                continue
            if tokens == ["}"]:
                if current is None:
                    raise SceneParseError(lineno, "unmatched '}'")
                self.blocks.append((kind, opened_at, current))
                current = None
                continue
            if current is not None:
                current.append((lineno, tokens))
            else:
                self.statements.append((lineno, tokens))
        if current is not None:
            raise SceneParseError(opened_at, f"unterminated {kind} block")


def _parse_object(opened_at: int, body: list[tuple[int, list[str]]]) -> ObjectSpec:
    object_id: Optional[int] = None
    class_label: Optional[str] = None
    subtype: Optional[str] = None
    dims: Optional[tuple[float, float, float]] = None
    reflectivity = DEFAULT_REFLECTIVITY
    gait: Optional[tuple[float, float]] = None
    keyframes: list[Keyframe] = []
    for lineno, toks in body:
        key, args = toks[0], toks[1:]
        if key == "id":
            _need(args, 1, lineno, "id")
            object_id = _to_int(args[0], lineno, "id")
        elif key == "class":
            _need(args, 1, lineno, "class")
            class_label = args[0]
            if class_label not in CLASS_LABELS:
                raise SceneParseError(lineno, f"unknown class {class_label!r}")
        elif key == "subtype":
            _need(args, 1, lineno, "subtype")
            subtype = args[0]
        elif key == "dims":
            _need(args, 3, lineno, "dims")
            dims = tuple(_to_float(a, lineno, "dims") for a in args)
        elif key == "reflectivity":
            _need(args, 1, lineno, "reflectivity")
            reflectivity = _to_float(args[0], lineno, "reflectivity")
        elif key == "gait":
            if len(args) == 1 and args[0] in geometry.GAIT_PRESETS:
                gait = geometry.GAIT_PRESETS[args[0]]
            else:
                _need(args, 2, lineno, "gait")
                gait = (_to_float(args[0], lineno, "gait frequency"),
                        _to_float(args[1], lineno, "gait amplitude"))
        elif key == "keyframe":
            _need(args, 5, lineno, "keyframe (t x y z yaw)")
            vals = [_to_float(a, lineno, "keyframe") for a in args]
            if vals[0] < 0.0:
                raise SceneParseError(lineno, "keyframe time must be >= 0")
            keyframes.append(Keyframe(time=vals[0],
                                      pose=Pose(position=np.array(vals[1:4]),
                                                yaw=vals[4])))
        else:
            raise SceneParseError(lineno, f"unknown object key {key!r}")
    if object_id is None:
        raise SceneParseError(opened_at, "object block requires an 'id'")
    if class_label is None:
        raise SceneParseError(opened_at, "object block requires a 'class'")
    if not keyframes:
        raise SceneParseError(opened_at, "object block requires at least one keyframe")
    if subtype is None:
        subtype = "car" if class_label == VEHICLE else "adult"
    if dims is None:
        table = geometry.VEHICLE_DIMS if class_label == VEHICLE else geometry.PEDESTRIAN_DIMS
        if subtype not in table:
            raise SceneParseError(opened_at, f"unknown {class_label} subtype {subtype!r}")
        dims = table[subtype]
    return ObjectSpec(object_id=object_id, class_label=class_label,
                      subtype=subtype, dims=dims, reflectivity=reflectivity,
                      trajectory=Trajectory(tuple(keyframes)), gait=gait)


def _parse_sensor(opened_at: int, body: list[tuple[int, list[str]]],
                  default_id: int) -> SensorModel:
    fields: dict = {"sensor_id": default_id}
    explicit_channels: list[float] = []
    for lineno, toks in body:
        key, args = toks[0], toks[1:]
        if key == "id":
            _need(args, 1, lineno, "id")
            fields["sensor_id"] = _to_int(args[0], lineno, "id")
        elif key == "position":
            _need(args, 3, lineno, "position")
            fields["position"] = tuple(_to_float(a, lineno, "position") for a in args)
        elif key == "yaw":
            _need(args, 1, lineno, "yaw")
            fields["yaw"] = _to_float(args[0], lineno, "yaw")
        elif key == "pitch":
            _need(args, 1, lineno, "pitch")
            fields["pitch"] = _to_float(args[0], lineno, "pitch")
        elif key == "channels":
            _need(args, 3, lineno, "channels (count min max)")
            count = _to_int(args[0], lineno, "channel count")
            if count < 1:
                raise SceneParseError(lineno, "channel count must be >= 1")
            lo = _to_float(args[1], lineno, "channel min")
            hi = _to_float(args[2], lineno, "channel max")
            fields["channels"] = uniform_channels(count, lo, hi)
        elif key == "channel":
            _need(args, 1, lineno, "channel")
            explicit_channels.append(_to_float(args[0], lineno, "channel"))
        elif key == "azimuth_steps":
            _need(args, 1, lineno, "azimuth_steps")
            fields["azimuth_steps"] = _to_int(args[0], lineno, "azimuth_steps")
        elif key == "max_range":
            _need(args, 1, lineno, "max_range")
            fields["max_range"] = _to_float(args[0], lineno, "max_range")
        elif key == "range_noise_sigma":
            _need(args, 1, lineno, "range_noise_sigma")
            fields["range_noise_sigma"] = _to_float(args[0], lineno, "range_noise_sigma")
        elif key == "dropout":
            _need(args, 1, lineno, "dropout")
            fields["dropout_prob"] = _to_float(args[0], lineno, "dropout")
        elif key == "intensity_exponent":
            _need(args, 1, lineno, "intensity_exponent")
            fields["intensity_exponent"] = _to_int(args[0], lineno, "intensity_exponent")
        else:
            raise SceneParseError(lineno, f"unknown sensor key {key!r}")
    if explicit_channels:
        if "channels" in fields:
            raise SceneParseError(opened_at, "use either 'channels' or 'channel' lines, not both")
        fields["channels"] = tuple(explicit_channels)
    try:
        return SensorModel(**fields)
    except ValueError as exc:
        raise SceneValidationError(f"sensor block at line {opened_at}: {exc}") from exc


def _parse_prop(opened_at: int, body: list[tuple[int, list[str]]]) -> StaticProp:
    center: Optional[tuple[float, float, float]] = None
    dims: Optional[tuple[float, float, float]] = None
    yaw = 0.0
    reflectivity = DEFAULT_REFLECTIVITY
    for lineno, toks in body:
        key, args = toks[0], toks[1:]
        if key == "center":
            _need(args, 3, lineno, "center")
            center = tuple(_to_float(a, lineno, "center") for a in args)
        elif key == "dims":
            _need(args, 3, lineno, "dims")
            dims = tuple(_to_float(a, lineno, "dims") for a in args)
        elif key == "yaw":
            _need(args, 1, lineno, "yaw")
            yaw = _to_float(args[0], lineno, "yaw")
        elif key == "reflectivity":
            _need(args, 1, lineno, "reflectivity")
            reflectivity = _to_float(args[0], lineno, "reflectivity")
        else:
            raise SceneParseError(lineno, f"unknown prop key {key!r}")
    if center is None or dims is None:
        raise SceneParseError(opened_at, "prop block requires 'center' and 'dims'")
    return StaticProp(center=center, dims=dims, yaw=yaw, reflectivity=reflectivity)


def parse_scene(text: str) -> SceneConfig:
    """Parse and validate a scene config document.

    Raises SceneParseError (with line number) for malformed input and
    SceneValidationError for inconsistent content.
    """
    reader = _BlockReader(text)
    top: dict = {}
    for lineno, toks in reader.statements:
        key, args = toks[0], toks[1:]
        if key == "name":
            _need(args, 1, lineno, "name")
            top["name"] = args[0]
        elif key == "duration":
            _need(args, 1, lineno, "duration")
            top["duration"] = _to_float(args[0], lineno, "duration")
        elif key == "frame_rate":
            _need(args, 1, lineno, "frame_rate")
            top["frame_rate"] = _to_float(args[0], lineno, "frame_rate")
        elif key == "seed":
            _need(args, 1, lineno, "seed")
            top["seed"] = _to_int(args[0], lineno, "seed")
        elif key == "ground_reflectivity":
            _need(args, 1, lineno, "ground_reflectivity")
            top["ground_reflectivity"] = _to_float(args[0], lineno, "ground_reflectivity")
        elif key == "ground_extent":
            _need(args, 1, lineno, "ground_extent")
            top["ground_extent"] = _to_float(args[0], lineno, "ground_extent")
        else:
            raise SceneParseError(lineno, f"unknown scene key {key!r}")
    if "duration" not in top:
        raise SceneValidationError("scene requires 'duration'")
    if "frame_rate" not in top:
        raise SceneValidationError("scene requires 'frame_rate'")

    objects = []
    sensors = []
    props = []
    for kind, opened_at, body in reader.blocks:
        if kind == "object":
            objects.append(_parse_object(opened_at, body))
        elif kind == "sensor":
            sensors.append(_parse_sensor(opened_at, body, default_id=len(sensors)))
        else:
            props.append(_parse_prop(opened_at, body))
    if not sensors:
        raise SceneValidationError("scene requires at least one sensor block")

    return SceneConfig(
        name=top.get("name", "scene"),
        duration=top["duration"],
        frame_rate=top["frame_rate"],
        objects=tuple(objects),
        sensors=tuple(sensors),
        ground_reflectivity=top.get("ground_reflectivity", DEFAULT_GROUND_REFLECTIVITY),
        ground_extent=top.get("ground_extent", DEFAULT_GROUND_EXTENT),
        static_props=tuple(props),
        seed=top.get("seed", 0),
    )


def format_scene(scene: SceneConfig) -> str:
    """Serialize a SceneConfig back to the document format (all fields explicit)."""
    lines = [
        f"name {scene.name}",
        f"duration {scene.duration!r}",
        f"frame_rate {scene.frame_rate!r}",
        f"seed {scene.seed}",
        f"ground_reflectivity {scene.ground_reflectivity!r}",
        f"ground_extent {scene.ground_extent!r}",
    ]
    for obj in scene.objects:
        lines += ["", "object {"]
        lines.append(f"  id {obj.object_id}")
        lines.append(f"  class {obj.class_label}")
        lines.append(f"  subtype {obj.subtype}")
        lines.append(f"  dims {obj.dims[0]!r} {obj.dims[1]!r} {obj.dims[2]!r}")
        lines.append(f"  reflectivity {obj.reflectivity!r}")
        if obj.gait is not None:
            lines.append(f"  gait {obj.gait[0]!r} {obj.gait[1]!r}")
        for kf in obj.trajectory.keyframes:
            p = kf.pose.position
            lines.append(f"  keyframe {float(kf.time)!r} {p[0]!r} {p[1]!r} {p[2]!r} "
                         f"{float(kf.pose.yaw)!r}")
        lines.append("}")
    for sensor in scene.sensors:
        lines += ["", "sensor {"]
        lines.append(f"  id {sensor.sensor_id}")
        lines.append(f"  position {sensor.position[0]!r} {sensor.position[1]!r} {sensor.position[2]!r}")
        lines.append(f"  yaw {sensor.yaw!r}")
        lines.append(f"  pitch {sensor.pitch!r}")
        for e in sensor.channels:
            lines.append(f"  channel {e!r}")
        lines.append(f"  azimuth_steps {sensor.azimuth_steps}")
        lines.append(f"  max_range {sensor.max_range!r}")
        lines.append(f"  range_noise_sigma {sensor.range_noise_sigma!r}")
        lines.append(f"  dropout {sensor.dropout_prob!r}")
        lines.append(f"  intensity_exponent {sensor.intensity_exponent}")
        lines.append("}")
    for prop in scene.static_props:
        lines += ["", "prop {"]
        lines.append(f"  center {prop.center[0]!r} {prop.center[1]!r} {prop.center[2]!r}")
        lines.append(f"  dims {prop.dims[0]!r} {prop.dims[1]!r} {prop.dims[2]!r}")
        lines.append(f"  yaw {prop.yaw!r}")
        lines.append(f"  reflectivity {prop.reflectivity!r}")
        lines.append("}")
    return "\n".join(lines) + "\n"
