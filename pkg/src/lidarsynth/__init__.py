"""Synthetic elevated-LiDAR traffic datasets and detection evaluation.

Pipeline: declarative scenes (scene) -> ray-cast LiDAR sweeps (raycast,
sensor) -> auto-labeled frames (annotate) -> serialized datasets (dataset)
-> baseline detections (detect) -> AP / precision / recall / F1 reports
(evaluation). pointops holds the detector-front-end operators (furthest
point sampling, voxelization); cli ties everything together.
"""

from importlib.resources import files as _files

from .annotate import BoundingBox3D, annotate_frame, point_in_box, points_in_box
from .detect import Detection, DetectorParams, cluster, detect_frame, fit_box, remove_ground
from .evaluation import (EvalReport, MatchConfig, average_precision, evaluate_dataset,
                         evaluate_frames, f1_score, iou_3d, iou_bev, match_frame,
                         prf_at_operating_point)
from .pointops import VoxelGrid, furthest_point_sampling, voxelize
from .raycast import Hit, Ray, SpatialIndex, TriangleMesh, build_index, ray_triangle
from .scene import (ObjectSpec, Pose, Keyframe, SceneConfig, SceneParseError,
                    SceneValidationError, StaticProp, Trajectory, format_scene,
                    geometry_at, parse_scene, pose_at)
from .sensor import (PointCloudFrame, SensorModel, generate_rays, simulate_frame,
                     simulate_scene)

__version__ = "0.1.0"


def demo_scene_path() -> str:
    """Filesystem path of the bundled demo scene config."""
    return str(_files("lidarsynth").joinpath("data/demo_scene.cfg"))
