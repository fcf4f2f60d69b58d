"""Bit-exact dataset serialization.

Layout of a dataset directory:

    manifest.json            written last (commit point)
    stats.json               written by compute_stats / the stats command
    points/NNNNNN.bin        little-endian float32 records (x, y, z, intensity)
    points/NNNNNN.id         little-endian int32 object id per point
    labels/NNNNNN.txt        one box per line (see encode_labels)

Frame indices are zero-padded to 6 digits. Label lines are
``class cx cy cz l w h yaw num_points object_id [score]`` with floats at 6
decimal places; the score column is present only in prediction files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .annotate import BoundingBox3D, annotate_frame, DEFAULT_MIN_POINTS
from .detect import Detection
from .scene import PEDESTRIAN, VEHICLE, SceneConfig
from .sensor import PointCloudFrame, UNKNOWN_ID, simulate_scene

FORMAT_VERSION = "1"
MANIFEST_NAME = "manifest.json"
STATS_NAME = "stats.json"
POINTS_DIR = "points"
LABELS_DIR = "labels"

CLASS_TOKENS = {VEHICLE: "Vehicle", PEDESTRIAN: "Pedestrian"}
TOKEN_CLASSES = {v: k for k, v in CLASS_TOKENS.items()}

_POINT_RECORD = 16  # 4 x float32
_ID_RECORD = 4  # int32


class DatasetFormatError(ValueError):
    """Malformed dataset file content."""


def frame_stem(frame_index: int) -> str:
    return f"{frame_index:06d}"


def encode_frame(frame: PointCloudFrame) -> bytes:
    """Point records as little-endian float32 (x, y, z, intensity)."""
    out = np.empty((frame.num_points, 4), dtype="<f4")
    out[:, :3] = frame.positions
    out[:, 3] = frame.intensity
    return out.tobytes()


def encode_frame_ids(frame: PointCloudFrame) -> bytes:
    """Companion id channel: one little-endian int32 per point."""
    return frame.object_ids.astype("<i4").tobytes()


def decode_frame(data: bytes, id_data: Optional[bytes] = None, *,
                 frame_index: int = 0, timestamp: float = 0.0) -> PointCloudFrame:
    """Inverse of encode_frame.

    Without an id channel every point gets the reserved "unknown" id (-2);
    sensor/channel/azimuth provenance is not serialized and comes back -1.
    """
    if len(data) % _POINT_RECORD != 0:
        offset = len(data) - len(data) % _POINT_RECORD
        raise DatasetFormatError(
            f"point buffer length {len(data)} is not a multiple of {_POINT_RECORD}"
            f" (trailing bytes start at offset {offset})")
    records = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    n = len(records)
    if id_data is not None:
        if len(id_data) != n * _ID_RECORD:
            raise DatasetFormatError(
                f"id buffer holds {len(id_data) // _ID_RECORD} records, expected {n}")
        ids = np.frombuffer(id_data, dtype="<i4").astype(np.int64)
    else:
        ids = np.full(n, UNKNOWN_ID, dtype=np.int64)
    unknown = np.full(n, -1, dtype=np.int64)
    return PointCloudFrame(
        frame_index=frame_index,
        timestamp=timestamp,
        positions=records[:, :3].astype(np.float64),
        intensity=records[:, 3].astype(np.float64),
        object_ids=ids,
        sensor_ids=unknown,
        channels=unknown.copy(),
        azimuths=unknown.copy(),
    )


def _format_box_fields(box: BoundingBox3D) -> str:
    return (f"{CLASS_TOKENS[box.class_label]} "
            f"{box.center[0]:.6f} {box.center[1]:.6f} {box.center[2]:.6f} "
            f"{box.dims[0]:.6f} {box.dims[1]:.6f} {box.dims[2]:.6f} "
            f"{box.yaw:.6f} {box.num_points} {box.object_id}")


def encode_labels(items: Sequence[Union[BoundingBox3D, Detection]]) -> str:
    """One line per box; Detection items get a trailing score column."""
    lines = []
    for item in items:
        if isinstance(item, Detection):
            lines.append(f"{_format_box_fields(item.box)} {item.score:.6f}")
        else:
            lines.append(_format_box_fields(item))
    return "".join(line + "\n" for line in lines)


def decode_labels(text: str, expect_scores: bool = False
                  ) -> Union[list[BoundingBox3D], list[Detection]]:
    """Inverse of encode_labels (floats within 1e-6 from formatting)."""
    n_fields = 11 if expect_scores else 10
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != n_fields:
            raise DatasetFormatError(
                f"line {lineno}: expected {n_fields} fields, got {len(tokens)}")
        cls = TOKEN_CLASSES.get(tokens[0])
        if cls is None:
            raise DatasetFormatError(f"line {lineno}: unknown class {tokens[0]!r}")
        try:
            vals = [float(t) for t in tokens[1:8]]
            num_points = int(tokens[8])
            object_id = int(tokens[9])
            score = float(tokens[10]) if expect_scores else None
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from None
        box = BoundingBox3D(class_label=cls, object_id=object_id,
                            center=np.array(vals[0:3]),
                            dims=(vals[3], vals[4], vals[5]),
                            yaw=vals[6], num_points=num_points)
        out.append(Detection(box=box, score=score) if expect_scores else box)
    return out


# --------------------------------------------------------------------------
# Directory-level reading and writing
# --------------------------------------------------------------------------

def read_frame(dataset_dir: Union[str, Path], frame_index: int) -> PointCloudFrame:
    root = Path(dataset_dir)
    stem = frame_stem(frame_index)
    bin_path = root / POINTS_DIR / f"{stem}.bin"
    id_path = root / POINTS_DIR / f"{stem}.id"
    id_data = id_path.read_bytes() if id_path.exists() else None
    manifest = read_manifest(root) if (root / MANIFEST_NAME).exists() else None
    rate = manifest["frame_rate"] if manifest else 1.0
    return decode_frame(bin_path.read_bytes(), id_data, frame_index=frame_index,
                        timestamp=frame_index / rate)


def read_point_file(path: Union[str, Path]) -> PointCloudFrame:
    """Decode one .bin (plus a neighboring .id sidecar when present)."""
    path = Path(path)
    id_path = path.with_suffix(".id")
    id_data = id_path.read_bytes() if id_path.exists() else None
    try:
        frame_index = int(path.stem)
    except ValueError:
        frame_index = 0
    return decode_frame(path.read_bytes(), id_data, frame_index=frame_index)


def label_dir(root: Union[str, Path]) -> Path:
    """Directory holding NNNNNN.txt labels: either <root>/labels or <root>."""
    root = Path(root)
    sub = root / LABELS_DIR
    return sub if sub.is_dir() else root


def list_label_frames(root: Union[str, Path]) -> list[int]:
    d = label_dir(root)
    frames = []
    for name in sorted(os.listdir(d)):
        if name.endswith(".txt") and name[:-4].isdigit():
            frames.append(int(name[:-4]))
    return frames


def read_labels(root: Union[str, Path], frame_index: int,
                expect_scores: bool = False):
    path = label_dir(root) / f"{frame_stem(frame_index)}.txt"
    try:
        return decode_labels(path.read_text(), expect_scores=expect_scores)
    except DatasetFormatError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None


def assign_splits(frame_count: int, fractions=(0.8, 0.1, 0.1)) -> list[str]:
    """Contiguous train/val/test assignment by frame index."""
    n_train = int(math.floor(frame_count * fractions[0]))
    n_val = int(math.floor(frame_count * fractions[1]))
    out = []
    for i in range(frame_count):
        if i < n_train:
            out.append("train")
        elif i < n_train + n_val:
            out.append("val")
        else:
            out.append("test")
    return out


def write_manifest(root: Path, scene: SceneConfig, frame_count: int) -> None:
    manifest = {
        "format_version": FORMAT_VERSION,
        "scene_name": scene.name,
        "frame_count": frame_count,
        "frame_rate": scene.frame_rate,
        "duration": scene.duration,
        "seed": scene.seed,
        "splits": assign_splits(frame_count),
        "sensors": [
            {
                "sensor_id": s.sensor_id,
                "position": list(s.position),
                "yaw": s.yaw,
                "pitch": s.pitch,
                "channels": list(s.channels),
                "azimuth_steps": s.azimuth_steps,
                "max_range": s.max_range,
                "range_noise_sigma": s.range_noise_sigma,
                "dropout_prob": s.dropout_prob,
                "intensity_exponent": s.intensity_exponent,
            }
            for s in scene.sensors
        ],
    }
    (root / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(root: Union[str, Path]) -> dict:
    path = Path(root) / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported format_version {manifest.get('format_version')!r}")
    return manifest


def write_dataset(scene: SceneConfig, out_dir: Union[str, Path],
                  min_points: int = DEFAULT_MIN_POINTS,
                  progress=None) -> int:
    """Simulate, annotate, and serialize every frame of ``scene``.

    Returns the frame count. The manifest is written last so readers can
    treat its presence as the completion marker.
    """
    root = Path(out_dir)
    (root / POINTS_DIR).mkdir(parents=True, exist_ok=True)
    (root / LABELS_DIR).mkdir(parents=True, exist_ok=True)
    count = 0
    for frame in simulate_scene(scene):
        stem = frame_stem(frame.frame_index)
        (root / POINTS_DIR / f"{stem}.bin").write_bytes(encode_frame(frame))
        (root / POINTS_DIR / f"{stem}.id").write_bytes(encode_frame_ids(frame))
        boxes = annotate_frame(scene, frame.frame_index, frame, min_points=min_points)
        (root / LABELS_DIR / f"{stem}.txt").write_text(encode_labels(boxes))
        count += 1
        if progress is not None:
            progress(frame.frame_index, frame.num_points)
    write_manifest(root, scene, count)
    return count


def compute_stats(dataset_dir: Union[str, Path]) -> dict:
    """Dataset totals: frames, points (overall, per class, reserved ids),
    boxes per class, per-frame point count min/mean/max. Missing or corrupt
    files are listed under "errors" instead of aborting."""
    root = Path(dataset_dir)
    manifest = read_manifest(root)
    frame_count = int(manifest["frame_count"])
    errors: list[str] = []
    per_frame_points: list[int] = []
    points_per_class = {VEHICLE: 0, PEDESTRIAN: 0, "ground": 0, "prop": 0,
                        "unlabeled_dynamic": 0}
    boxes_per_class = {VEHICLE: 0, PEDESTRIAN: 0}
    total_points = 0
    for frame_index in range(frame_count):
        stem = frame_stem(frame_index)
        try:
            frame = read_frame(root, frame_index)
        except (OSError, DatasetFormatError) as exc:
            errors.append(f"{POINTS_DIR}/{stem}.bin: {exc}")
            continue
        try:
            boxes = read_labels(root, frame_index)
        except (OSError, DatasetFormatError) as exc:
            errors.append(f"{LABELS_DIR}/{stem}.txt: {exc}")
            boxes = []
        id_to_class = {b.object_id: b.class_label for b in boxes}
        for b in boxes:
            boxes_per_class[b.class_label] += 1
        n = frame.num_points
        per_frame_points.append(n)
        total_points += n
        ids, counts = np.unique(frame.object_ids, return_counts=True)
        for oid, cnt in zip(ids.tolist(), counts.tolist()):
            if oid == 0:
                points_per_class["ground"] += cnt
            elif oid == -1:
                points_per_class["prop"] += cnt
            elif oid in id_to_class:
                points_per_class[id_to_class[oid]] += cnt
            else:
                points_per_class["unlabeled_dynamic"] += cnt
    stats = {
        "frames": frame_count,
        "total_points": total_points,
        "points_per_class": points_per_class,
        "boxes_per_class": boxes_per_class,
        "points_per_frame": {
            "min": min(per_frame_points) if per_frame_points else 0,
            "mean": (total_points / len(per_frame_points)) if per_frame_points else 0.0,
            "max": max(per_frame_points) if per_frame_points else 0,
        },
    }
    if errors:
        stats["errors"] = errors
    return stats
