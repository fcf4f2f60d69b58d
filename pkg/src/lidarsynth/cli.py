"""Command-line driver.

Subcommands: generate, detect, eval, stats, sample-fps, voxelize,
export-ply. Exit codes: 0 success, 1 usage error, 2 data error, 3
internal error. ``--seed`` and ``--jobs`` never change output content:
all randomness is counter-based, and jobs only sets the kernel thread
count.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numba
import numpy as np

from . import dataset, demo_scene_path, evaluation, pointops
from .detect import DetectorParams, detect_frame
from .scene import SceneParseError, SceneValidationError, parse_scene
from .sensor import PointCloudFrame

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the CLI contract wants 1.
    def error(self, message):
        raise _UsageError(message)


class _DataError(Exception):
    pass


def _set_jobs(jobs: int) -> None:
    if jobs < 1:
        raise _UsageError("--jobs must be >= 1")
    numba.set_num_threads(min(jobs, numba.config.NUMBA_NUM_THREADS))


def _load_scene(path_arg: str):
    path = demo_scene_path() if path_arg == "demo" else path_arg
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _DataError(f"cannot read scene file: {exc}") from None
    return parse_scene(text)


def _prepare_out_dir(out_dir: str, force: bool) -> Path:
    path = Path(out_dir)
    if path.exists() and any(path.iterdir()):
        if not force:
            raise _DataError(
                f"output directory {path} exists and is not empty (use --force)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_generate(args) -> int:
    scene = _load_scene(args.scene)
    if args.seed is not None:
        scene = replace(scene, seed=args.seed)
    out = _prepare_out_dir(args.out, args.force)
    _set_jobs(args.jobs)
    t0 = time.perf_counter()
    total = {"points": 0}

    def progress(frame_index, num_points):
        total["points"] += num_points

    frames = dataset.write_dataset(scene, out, min_points=args.min_points,
                                   progress=progress)
    dt = time.perf_counter() - t0
    print(f"generated {frames} frames, {total['points']} points "
          f"-> {out} ({dt:.1f} s, seed {scene.seed}, jobs {args.jobs})")
    return EXIT_OK


def _cmd_detect(args) -> int:
    root = Path(args.data)
    try:
        manifest = dataset.read_manifest(root)
    except (OSError, dataset.DatasetFormatError) as exc:
        raise _DataError(str(exc)) from None
    out = _prepare_out_dir(args.out, args.force)
    _set_jobs(args.jobs)
    params = DetectorParams(
        ground_inlier_threshold=args.ground_threshold,
        ransac_iterations=args.ransac_iterations,
        cluster_radius=args.cluster_radius,
        min_cluster_size=args.min_cluster_size,
        seed=args.seed,
    )
    n_det = 0
    for frame_index in range(int(manifest["frame_count"])):
        try:
            frame = dataset.read_frame(root, frame_index)
        except (OSError, dataset.DatasetFormatError) as exc:
            raise _DataError(str(exc)) from None
        detections = detect_frame(frame, params)
        n_det += len(detections)
        stem = dataset.frame_stem(frame_index)
        (out / f"{stem}.txt").write_text(dataset.encode_labels(detections))
    print(f"detected {n_det} objects over {manifest['frame_count']} frames -> {out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = evaluation.MatchConfig(
        iou_kind=args.iou_kind,
        iou_thresholds={"vehicle": args.iou_vehicle, "pedestrian": args.iou_ped},
    )
    try:
        report = evaluation.evaluate_dataset(args.gt, args.pred, config)
    except FileNotFoundError as exc:
        raise _DataError(str(exc)) from None
    except ValueError as exc:
        raise _DataError(str(exc)) from None
    print(evaluation.format_report_table(report))
    kv = evaluation.format_report_kv(report)
    if args.out:
        Path(args.out).write_text(kv)
        print(f"report -> {args.out}")
    else:
        print()
        print(kv, end="")
    return EXIT_OK


def _cmd_stats(args) -> int:
    try:
        stats = dataset.compute_stats(args.data)
    except (OSError, dataset.DatasetFormatError) as exc:
        raise _DataError(str(exc)) from None
    print(json.dumps(stats, indent=2, sort_keys=True))
    return EXIT_OK


def _read_points(path: str):
    try:
        return dataset.read_point_file(path)
    except (OSError, dataset.DatasetFormatError) as exc:
        raise _DataError(str(exc)) from None


def _cmd_sample_fps(args) -> int:
    frame = _read_points(args.input)
    if frame.num_points == 0:
        raise _DataError(f"{args.input} holds no points")
    idx = pointops.furthest_point_sampling(frame.positions, args.k, args.start)
    if args.out:
        sub = PointCloudFrame(
            frame_index=frame.frame_index, timestamp=frame.timestamp,
            positions=frame.positions[idx], intensity=frame.intensity[idx],
            object_ids=frame.object_ids[idx], sensor_ids=frame.sensor_ids[idx],
            channels=frame.channels[idx], azimuths=frame.azimuths[idx])
        Path(args.out).write_bytes(dataset.encode_frame(sub))
        Path(args.out).with_suffix(".id").write_bytes(dataset.encode_frame_ids(sub))
        print(f"sampled {len(idx)} of {frame.num_points} points -> {args.out}")
    else:
        print(" ".join(str(i) for i in idx.tolist()))
    return EXIT_OK


def _cmd_voxelize(args) -> int:
    frame = _read_points(args.input)
    grid = pointops.voxelize(
        frame.positions,
        voxel_size=tuple(args.voxel_size),
        range_min=tuple(args.range_min),
        range_max=tuple(args.range_max),
        max_points_per_voxel=args.max_points,
        max_voxels=args.max_voxels,
    )
    kept = int(sum(len(p) for p in grid.point_indices))
    summary = {
        "input_points": frame.num_points,
        "voxels": grid.num_voxels,
        "kept_points": kept,
        "total_bucketed": int(grid.counts.sum()),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out:
        doc = {
            "voxel_size": list(grid.voxel_size),
            "range_min": grid.range_min.tolist(),
            "range_max": grid.range_max.tolist(),
            "voxels": [
                {"coord": list(map(int, c)), "points": p.tolist(), "count": int(n)}
                for c, p, n in grid.voxels()
            ],
        }
        Path(args.out).write_text(json.dumps(doc))
        print(f"voxel grid -> {args.out}")
    return EXIT_OK


def _cmd_export_ply(args) -> int:
    frame = _read_points(args.input)
    gray = np.clip(np.round(frame.intensity * 255.0), 0, 255).astype(np.uint8)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {frame.num_points}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property int object_id",
        "end_header",
    ]
    pos = frame.positions
    for i in range(frame.num_points):
        g = int(gray[i])
        lines.append(f"{pos[i, 0]:.4f} {pos[i, 1]:.4f} {pos[i, 2]:.4f} "
                     f"{g} {g} {g} {int(frame.object_ids[i])}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {frame.num_points} points -> {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="lidarsynth",
                     description="Synthetic elevated-LiDAR datasets and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a scene and write a dataset")
    p.add_argument("--scene", required=True,
                   help="scene config file, or 'demo' for the bundled scene")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--min-points", type=int, default=5,
                   help="skip labels for objects with fewer points")
    p.add_argument("--force", action="store_true",
                   help="write into an existing non-empty directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("detect", help="run the baseline detector over a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="prediction output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--seed", type=int, default=0, help="RANSAC seed")
    p.add_argument("--ground-threshold", type=float, default=0.15)
    p.add_argument("--ransac-iterations", type=int, default=100)
    p.add_argument("--cluster-radius", type=float, default=0.7)
    p.add_argument("--min-cluster-size", type=int, default=5)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("--gt", required=True, help="dataset dir or label dir")
    p.add_argument("--pred", required=True, help="prediction label dir")
    p.add_argument("--iou-kind", choices=("bev", "3d"), default="bev")
    p.add_argument("--iou-vehicle", type=float, default=0.5)
    p.add_argument("--iou-ped", type=float, default=0.25)
    p.add_argument("--out", default=None, help="write the key-value report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("sample-fps", help="furthest point sampling on one frame")
    p.add_argument("--in", dest="input", required=True, help="points .bin file")
    p.add_argument("--k", type=int, default=pointops.DEFAULT_NUM_KEYPOINTS)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--out", default=None, help="write the sampled subset as .bin")
    p.set_defaults(func=_cmd_sample_fps)

    p = sub.add_parser("voxelize", help="voxelize one frame")
    p.add_argument("--in", dest="input", required=True, help="points .bin file")
    p.add_argument("--voxel-size", type=float, nargs=3,
                   default=list(pointops.DEFAULT_VOXEL_SIZE))
    p.add_argument("--range-min", type=float, nargs=3, default=[-80.0, -80.0, -2.0])
    p.add_argument("--range-max", type=float, nargs=3, default=[80.0, 80.0, 6.0])
    p.add_argument("--max-points", type=int, default=pointops.DEFAULT_MAX_POINTS_PER_VOXEL)
    p.add_argument("--max-voxels", type=int, default=pointops.DEFAULT_MAX_VOXELS)
    p.add_argument("--out", default=None, help="write the full grid as JSON")
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("export-ply", help="export one frame as ASCII PLY")
    p.add_argument("--in", dest="input", required=True, help="points .bin file")
    p.add_argument("--out", required=True, help="output .ply path")
    p.set_defaults(func=_cmd_export_ply)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (_DataError, SceneParseError, SceneValidationError,
            dataset.DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
