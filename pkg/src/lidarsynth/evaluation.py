"""Detection metrics: rotated-box IoU (BEV and 3D), greedy
confidence-ordered matching, 40-point interpolated average precision, and
precision/recall/F1 at the max-F1 operating point.

Matching is per frame and per class; metrics aggregate over all frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .annotate import BoundingBox3D
from .detect import Detection
from .scene import PEDESTRIAN, VEHICLE

N_RECALL_POINTS = 40
DEFAULT_IOU_THRESHOLDS = {VEHICLE: 0.5, PEDESTRIAN: 0.25}


@dataclass(frozen=True)
class MatchConfig:
    iou_kind: str = "bev"  # "bev" or "3d"
    iou_thresholds: dict = field(default_factory=lambda: dict(DEFAULT_IOU_THRESHOLDS))
    n_recall_points: int = N_RECALL_POINTS

    def __post_init__(self) -> None:
        if self.iou_kind not in ("bev", "3d"):
            raise ValueError("iou_kind must be 'bev' or '3d'")
        for cls, thr in self.iou_thresholds.items():
            if not 0.0 < thr <= 1.0:
                raise ValueError(f"iou threshold for {cls} must lie in (0, 1]")

    def iou(self, a: BoundingBox3D, b: BoundingBox3D) -> float:
        return iou_3d(a, b) if self.iou_kind == "3d" else iou_bev(a, b)


def footprint_corners(box: BoundingBox3D) -> np.ndarray:
    """(4, 2) BEV rectangle corners, counterclockwise."""
    l, w = box.dims[0], box.dims[1]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    local = np.array([[l, w], [-l, w], [-l, -w], [l, -w]]) * 0.5
    out = np.empty_like(local)
    out[:, 0] = c * local[:, 0] - s * local[:, 1] + box.center[0]
    out[:, 1] = s * local[:, 0] + c * local[:, 1] + box.center[1]
    return out


def _clip_polygon(subject: np.ndarray, edge_a: np.ndarray, edge_b: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by the half-plane left of
    the directed edge a->b (for a CCW clip polygon)."""
    if len(subject) == 0:
        return subject
    ex, ey = edge_b[0] - edge_a[0], edge_b[1] - edge_a[1]
    side = ex * (subject[:, 1] - edge_a[1]) - ey * (subject[:, 0] - edge_a[0])
    out = []
    n = len(subject)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = subject[i], subject[j]
        si, sj = side[i], side[j]
        if si >= 0.0:
            out.append(pi)
        if (si > 0.0 and sj < 0.0) or (si < 0.0 and sj > 0.0):
            u = si / (si - sj)
            out.append(pi + u * (pj - pi))
    return np.array(out) if out else np.zeros((0, 2))


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def bev_intersection_area(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Overlap area of the two yaw-rotated footprints."""
    poly = footprint_corners(a)
    clip = footprint_corners(b)
    for i in range(4):
        poly = _clip_polygon(poly, clip[i], clip[(i + 1) % 4])
        if len(poly) == 0:
            return 0.0
    return _polygon_area(poly)


def iou_bev(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Bird's-eye-view IoU of the rotated footprints; symmetric, in [0, 1]."""
    inter = bev_intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    area_a = a.dims[0] * a.dims[1]
    area_b = b.dims[0] * b.dims[1]
    return min(1.0, inter / (area_a + area_b - inter))


def iou_3d(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Volumetric IoU: BEV intersection extruded over the z overlap."""
    inter_area = bev_intersection_area(a, b)
    if inter_area <= 0.0:
        return 0.0
    za0, za1 = a.center[2] - a.dims[2] / 2.0, a.center[2] + a.dims[2] / 2.0
    zb0, zb1 = b.center[2] - b.dims[2] / 2.0, b.center[2] + b.dims[2] / 2.0
    overlap = min(za1, zb1) - max(za0, zb0)
    if overlap <= 0.0:
        return 0.0
    inter = inter_area * overlap
    return min(1.0, inter / (a.volume + b.volume - inter))


def match_frame(detections: Sequence[Detection], ground_truth: Sequence[BoundingBox3D],
                iou_threshold: float, config: MatchConfig = MatchConfig()
                ) -> tuple[np.ndarray, int]:
    """Greedy score-ordered matching within one frame and one class.

    Returns (tp_flags aligned to the input detection order, number of
    unmatched ground-truth boxes). Each detection, in descending score
    order (ties keep input order), claims the unclaimed GT of highest IoU
    if that IoU >= iou_threshold; IoU ties resolve to the lowest GT index.
    """
    n_det = len(detections)
    n_gt = len(ground_truth)
    tp = np.zeros(n_det, dtype=bool)
    if n_det == 0 or n_gt == 0:
        return tp, n_gt
    scores = np.array([d.score for d in detections])
    det_order = np.argsort(-scores, kind="stable")
    claimed = np.zeros(n_gt, dtype=bool)
    for di in det_order:
        best_iou = -1.0
        best_gt = -1
        for gi in range(n_gt):
            if claimed[gi]:
                continue
            iou = config.iou(detections[di].box, ground_truth[gi])
            if iou > best_iou:  # strict: equal IoU keeps the lower index
                best_iou = iou
                best_gt = gi
        if best_gt >= 0 and best_iou >= iou_threshold:
            claimed[best_gt] = True
            tp[di] = True
    return tp, n_gt - int(claimed.sum())


def average_precision(scores: np.ndarray, tp_flags: np.ndarray, gt_count: int,
                      n_recall_points: int = N_RECALL_POINTS) -> Optional[float]:
    """Interpolated AP: mean of the max precision at recall >= r over
    r in {1/N, ..., N/N}. None when gt_count is 0 (undefined)."""
    if gt_count < 1:
        return None
    scores = np.asarray(scores, dtype=np.float64)
    tp_flags = np.asarray(tp_flags, dtype=bool)
    if len(scores) == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(tp_flags[order])
    fp = np.cumsum(~tp_flags[order])
    recall = tp / gt_count
    precision = tp / (tp + fp)
    total = 0.0
    for k in range(1, n_recall_points + 1):
        r = k / n_recall_points
        mask = recall >= r - 1e-12
        total += float(precision[mask].max()) if np.any(mask) else 0.0
    return total / n_recall_points


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf_at_operating_point(scores: np.ndarray, tp_flags: np.ndarray, gt_count: int
                           ) -> Optional[tuple[float, float, float, float]]:
    """(precision, recall, F1, score cutoff) maximizing F1 over all
    candidate cutoffs; F1 ties resolve to the higher cutoff. None when
    gt_count is 0."""
    if gt_count < 1:
        return None
    scores = np.asarray(scores, dtype=np.float64)
    tp_flags = np.asarray(tp_flags, dtype=bool)
    if len(scores) == 0:
        return 0.0, 0.0, 0.0, 1.0
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(tp_flags[order]).astype(np.float64)
    k = np.arange(1, len(s) + 1, dtype=np.float64)
    precision = tp / k
    recall = tp / gt_count
    denom = precision + recall
    f1 = np.where(denom > 0.0, 2.0 * precision * recall / np.maximum(denom, 1e-300), 0.0)
    # Candidate cutoffs are the distinct scores: prefix ends where the
    # score changes. Scanning best-first, strict > keeps the higher cutoff.
    is_cut = np.ones(len(s), dtype=bool)
    is_cut[:-1] = s[:-1] != s[1:]
    best_f1 = -1.0
    best_i = 0
    for i in np.nonzero(is_cut)[0]:
        if f1[i] > best_f1:
            best_f1 = f1[i]
            best_i = int(i)
    return (float(precision[best_i]), float(recall[best_i]),
            float(f1[best_i]), float(s[best_i]))


@dataclass
class ClassEval:
    class_label: str
    ap: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    gt_count: int
    score_threshold: float


@dataclass
class EvalReport:
    iou_kind: str
    iou_thresholds: dict
    per_class: dict  # class label -> ClassEval | None (None: no GT)
    frames: int


def evaluate_frames(gt_frames: Sequence[Sequence[BoundingBox3D]],
                    det_frames: Sequence[Sequence[Detection]],
                    config: MatchConfig = MatchConfig()) -> EvalReport:
    """Aggregate metrics over aligned per-frame GT/detection lists."""
    if len(gt_frames) != len(det_frames):
        raise ValueError("ground truth and detections must align by frame")
    per_class = {}
    for cls in (PEDESTRIAN, VEHICLE):
        thr = config.iou_thresholds.get(cls)
        if thr is None:
            continue
        scores: list[float] = []
        flags: list[bool] = []
        gt_total = 0
        for gts, dets in zip(gt_frames, det_frames):
            cls_gt = [g for g in gts if g.class_label == cls]
            cls_det = [d for d in dets if d.box.class_label == cls]
            tp_flags, _ = match_frame(cls_det, cls_gt, thr, config)
            scores.extend(d.score for d in cls_det)
            flags.extend(bool(f) for f in tp_flags)
            gt_total += len(cls_gt)
        if gt_total == 0:
            per_class[cls] = None
            continue
        score_arr = np.array(scores, dtype=np.float64)
        flag_arr = np.array(flags, dtype=bool)
        ap = average_precision(score_arr, flag_arr, gt_total, config.n_recall_points)
        precision, recall, f1, cutoff = prf_at_operating_point(score_arr, flag_arr, gt_total)
        kept = score_arr >= cutoff
        tp = int(np.count_nonzero(flag_arr & kept))
        fp = int(np.count_nonzero(~flag_arr & kept))
        per_class[cls] = ClassEval(
            class_label=cls, ap=float(ap), precision=precision, recall=recall,
            f1=f1, tp=tp, fp=fp, fn=gt_total - tp, gt_count=gt_total,
            score_threshold=cutoff)
    return EvalReport(iou_kind=config.iou_kind,
                      iou_thresholds=dict(config.iou_thresholds),
                      per_class=per_class, frames=len(gt_frames))


def evaluate_dataset(gt_dir, pred_dir, config: MatchConfig = MatchConfig()) -> EvalReport:
    """Evaluate prediction label files against ground-truth label files.

    Frames are defined by the ground-truth side; a missing prediction file
    counts as zero detections. Prediction files for frames absent from the
    ground truth are an error (mismatched datasets).
    """
    from . import dataset  # file formats live in the dataset module

    gt_frames_idx = dataset.list_label_frames(gt_dir)
    pred_frames_idx = set(dataset.list_label_frames(pred_dir))
    if not gt_frames_idx:
        raise FileNotFoundError(f"no ground-truth label files under {gt_dir}")
    extra = sorted(pred_frames_idx - set(gt_frames_idx))
    if extra:
        shown = ", ".join(dataset.frame_stem(i) for i in extra[:10])
        more = "" if len(extra) <= 10 else f" (+{len(extra) - 10} more)"
        raise ValueError(
            f"prediction frames without ground truth: {shown}{more}")
    gt_frames = []
    det_frames = []
    for idx in gt_frames_idx:
        gt_frames.append(dataset.read_labels(gt_dir, idx, expect_scores=False))
        if idx in pred_frames_idx:
            det_frames.append(dataset.read_labels(pred_dir, idx, expect_scores=True))
        else:
            det_frames.append([])
    return evaluate_frames(gt_frames, det_frames, config)


def format_report_table(report: EvalReport) -> str:
    """Human-readable table of the four metrics per class."""
    lines = [
        f"Detection results ({report.iou_kind.upper()} IoU, thresholds: "
        + ", ".join(f"{c}={t:g}" for c, t in sorted(report.iou_thresholds.items()))
        + f", {report.frames} frames)",
        f"{'Metric':<12}" + "".join(f"{c.capitalize():>14}" for c in report.per_class),
    ]
    rows = [("AP", "ap"), ("Precision", "precision"), ("Recall", "recall"),
            ("F1-Score", "f1")]
    for title, attr in rows:
        cells = []
        for cls, ce in report.per_class.items():
            cells.append("n/a" if ce is None else f"{getattr(ce, attr) * 100.0:.2f}%")
        lines.append(f"{title:<12}" + "".join(f"{c:>14}" for c in cells))
    counts = []
    for cls, ce in report.per_class.items():
        if ce is not None:
            counts.append(f"{cls}: TP={ce.tp} FP={ce.fp} FN={ce.fn} GT={ce.gt_count} "
                          f"cutoff={ce.score_threshold:.4f}")
    lines.extend(counts)
    return "\n".join(lines)


def format_report_kv(report: EvalReport) -> str:
    """Machine-readable key-value document, one block per class with GT."""
    lines = [f"iou_kind {report.iou_kind}", f"frames {report.frames}"]
    for cls, ce in report.per_class.items():
        if ce is None:
            continue
        lines += [
            "",
            f"class {cls}",
            f"ap {ce.ap:.9f}",
            f"precision {ce.precision:.9f}",
            f"recall {ce.recall:.9f}",
            f"f1 {ce.f1:.9f}",
            f"tp {ce.tp}",
            f"fp {ce.fp}",
            f"fn {ce.fn}",
            f"gt_count {ce.gt_count}",
            f"score_threshold {ce.score_threshold:.9f}",
        ]
    return "\n".join(lines) + "\n"
