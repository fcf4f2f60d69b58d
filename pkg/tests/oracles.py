"""Independent reference implementations used only for verification.

Everything here is deliberately written the straightforward slow way
(plain loops, brute force, third-party geometry) so it shares no code
path with the implementations under test.
"""

from __future__ import annotations

import numpy as np
from shapely.geometry import Polygon

from lidarsynth.evaluation import footprint_corners
from lidarsynth.raycast import T_EPSILON


# --- ray casting ----------------------------------------------------------

def brute_force_nearest(origin, direction, max_range, va, vb, vc):
    """Scan every triangle with Moller-Trumbore; smallest t wins, exact
    ties go to the lowest triangle index. Returns (t, index) or (inf, -1).

    Same documented edge rule as the BVH: closed triangles, |det| >= 1e-14,
    t in [T_EPSILON, max_range].
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    e1 = vb - va
    e2 = vc - va
    p = np.cross(d[None, :], e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) >= 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = o[None, :] - va
    u = np.einsum("ij,ij->i", tvec, p) * inv
    q = np.cross(tvec, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    ok &= (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0)
    ok &= (t >= T_EPSILON) & (t <= max_range)
    if not np.any(ok):
        return np.inf, -1
    idx = np.nonzero(ok)[0]
    ts = t[idx]
    best = np.lexsort((idx, ts))[0]  # min t, then min index
    return float(ts[best]), int(idx[best])


# --- furthest point sampling ---------------------------------------------

def fps_greedy(points, k, start_index):
    """Literal greedy FPS: each step rescans all candidates."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k >= n:
        return list(range(n))
    selected = [start_index]
    while len(selected) < k:
        best, best_d = -1, -1.0
        for j in range(n):
            if j in selected:
                continue
            dj = min(float(np.sum((pts[j] - pts[s]) ** 2)) for s in selected)
            if dj > best_d:
                best, best_d = j, dj
        selected.append(best)
    return selected


# --- clustering -----------------------------------------------------------

def cluster_union_find(points, radius, min_cluster_size):
    """O(n^2) union over all pairs within radius."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    r2 = radius * radius
    for i in range(n):
        for j in range(i + 1, n):
            if np.sum((pts[i] - pts[j]) ** 2) <= r2:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = [sorted(v) for v in groups.values() if len(v) >= min_cluster_size]
    out.sort(key=lambda c: c[0])
    return out


# --- rotated IoU ----------------------------------------------------------

def iou_bev_shapely(a, b):
    pa = Polygon(footprint_corners(a))
    pb = Polygon(footprint_corners(b))
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return inter / union if union > 0 else 0.0


def iou_3d_monte_carlo(a, b, n_samples, seed):
    """Volume IoU estimated by sampling uniformly inside box a."""
    from lidarsynth.annotate import points_in_box

    rng = np.random.default_rng(seed)
    u = rng.random((n_samples, 3)) - 0.5
    local = u * np.array(a.dims)
    c, s = np.cos(a.yaw), np.sin(a.yaw)
    pts = np.empty_like(local)
    pts[:, 0] = c * local[:, 0] - s * local[:, 1] + a.center[0]
    pts[:, 1] = s * local[:, 0] + c * local[:, 1] + a.center[1]
    pts[:, 2] = local[:, 2] + a.center[2]
    frac = float(np.count_nonzero(points_in_box(pts, b))) / n_samples
    inter = frac * a.volume
    union = a.volume + b.volume - inter
    return inter / union if union > 0 else 0.0


# --- matching and metrics -------------------------------------------------

def match_greedy(det_boxes, det_scores, gt_boxes, iou_fn, threshold):
    """Greedy matching replayed with plain loops.

    Detections in descending score order (stable), each claims the best
    unclaimed GT by IoU (ties -> lowest GT index) when IoU >= threshold.
    """
    order = sorted(range(len(det_boxes)), key=lambda i: (-det_scores[i], i))
    claimed = set()
    tp = [False] * len(det_boxes)
    for di in order:
        best_gt, best_iou = -1, -1.0
        for gi in range(len(gt_boxes)):
            if gi in claimed:
                continue
            iou = iou_fn(det_boxes[di], gt_boxes[gi])
            if iou > best_iou:
                best_gt, best_iou = gi, iou
        if best_gt >= 0 and best_iou >= threshold:
            claimed.add(best_gt)
            tp[di] = True
    return tp


def average_precision_literal(scores, flags, gt_count, n_points=40):
    """AP from the definition: for each recall level take the max
    precision among operating points reaching it."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    tps = 0
    fps = 0
    pr = []
    for i in order:
        if flags[i]:
            tps += 1
        else:
            fps += 1
        pr.append((tps / gt_count, tps / (tps + fps)))
    total = 0.0
    for k in range(1, n_points + 1):
        r = k / n_points
        best = 0.0
        for rec, prec in pr:
            if rec >= r and prec > best:
                best = prec
        total += best
    return total / n_points


def prf_max_f1_literal(scores, flags, gt_count):
    """Try every cutoff (each distinct score), keep max F1, ties to the
    higher cutoff."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    best = (0.0, 0.0, 0.0, 1.0)
    if not order:
        return best
    best_f1 = -1.0
    tps = 0
    for rank, i in enumerate(order):
        if flags[i]:
            tps += 1
        last_of_score = (rank == len(order) - 1
                         or scores[order[rank + 1]] != scores[i])
        if not last_of_score:
            continue
        p = tps / (rank + 1)
        r = tps / gt_count
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best = (p, r, f1, scores[i])
    return best
