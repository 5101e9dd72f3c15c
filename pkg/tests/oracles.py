"""Independent reference implementations used to check the library.

Everything here deliberately avoids the library's computational paths:
corners via complex multiplication, IoU via rasterization, NMS and anchor
assignment via plain nested loops.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from orientseg.geometry import RotatedBox, rotated_iou
from orientseg.postprocess import NmsConfig


def corner_oracle(box: RotatedBox) -> list[tuple[float, float]]:
    """Rectangle corners via complex rotation, TL/TR/BR/BL order."""
    rot = cmath.exp(1j * math.radians(box.theta))
    center = complex(box.x_c, box.y_c)
    out = []
    for u, v in ((-box.w / 2, -box.h / 2), (box.w / 2, -box.h / 2),
                 (box.w / 2, box.h / 2), (-box.w / 2, box.h / 2)):
        z = center + complex(u, v) * rot
        out.append((z.real, z.imag))
    return out


def points_in_box(box: RotatedBox, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized membership test in the box's local frame."""
    a = math.radians(box.theta)
    c, s = math.cos(a), math.sin(a)
    dx = xs - box.x_c
    dy = ys - box.y_c
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= box.w / 2) & (np.abs(v) <= box.h / 2)


def iou_pixel_count(a: RotatedBox, b: RotatedBox, cell: float = 0.01,
                    extent: float | None = None) -> float:
    """IoU by counting grid cells whose center lies inside both / either box.

    The grid covers a square of the given extent around the union's center;
    the default matches a 0.01 px resolution over the joint bounding region.
    """
    if extent is None:
        extent = max(abs(a.x_c - b.x_c) + a.w + a.h, abs(a.y_c - b.y_c) + b.w + b.h) * 2
    cx = (a.x_c + b.x_c) / 2
    cy = (a.y_c + b.y_c) / 2
    n = int(round(extent / cell))
    coords = (np.arange(n) + 0.5) * cell
    xs = coords[None, :] + (cx - extent / 2)
    ys = coords[:, None] + (cy - extent / 2)
    in_a = points_in_box(a, xs, ys)
    in_b = points_in_box(b, xs, ys)
    both = int(np.count_nonzero(in_a & in_b))
    either = int(np.count_nonzero(in_a | in_b))
    if either == 0:
        return 0.0
    return both / either


def _halfplanes(box: RotatedBox) -> list[tuple[float, float, float]]:
    """Interior of the box as the intersection of a*x + b*y >= c."""
    corners = corner_oracle(box)
    planes = []
    for (x0, y0), (x1, y1) in zip(corners, corners[1:] + corners[:1]):
        a = -(y1 - y0)
        b = x1 - x0
        planes.append((a, b, a * x0 + b * y0))
    return planes


def _column_intervals(box: RotatedBox, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact [low, high] vertical interval of the box at each column center."""
    low = np.full(xs.shape, -np.inf)
    high = np.full(xs.shape, np.inf)
    feasible = np.ones(xs.shape, dtype=bool)
    for a, b, c in _halfplanes(box):
        if b > 1e-12:
            low = np.maximum(low, (c - a * xs) / b)
        elif b < -1e-12:
            high = np.minimum(high, (c - a * xs) / b)
        else:
            feasible &= a * xs >= c
    low[~feasible] = np.inf
    return low, high


def iou_column_scan(a: RotatedBox, b: RotatedBox, n_columns: int = 8192) -> float:
    """Rasterized IoU: x discretized into columns, y extent exact per column.

    Box areas are exact (w*h); only the intersection is integrated, so the
    discretization error stays far below pixel-count sampling.
    """
    ca = corner_oracle(a)
    cb = corner_oracle(b)
    x0 = max(min(p[0] for p in ca), min(p[0] for p in cb))
    x1 = min(max(p[0] for p in ca), max(p[0] for p in cb))
    union_exact = a.w * a.h + b.w * b.h
    if x1 <= x0:
        return 0.0
    dx = (x1 - x0) / n_columns
    xs = x0 + (np.arange(n_columns) + 0.5) * dx
    low_a, high_a = _column_intervals(a, xs)
    low_b, high_b = _column_intervals(b, xs)
    overlap = np.minimum(high_a, high_b) - np.maximum(low_a, low_b)
    inter = float(np.sum(np.clip(overlap, 0.0, None)) * dx)
    union = union_exact - inter
    if union <= 0:
        return 1.0
    return inter / union


def brute_force_nms(dets, cfg: NmsConfig):
    """Reference NMS: quadratic scan with explicit suppression flags."""
    order = sorted(
        (i for i, d in enumerate(dets) if d.score >= cfg.score_threshold),
        key=lambda i: (-dets[i].score, i),
    )
    keep = []
    for i in order:
        if len(keep) >= cfg.max_keep:
            break
        ok = True
        for j in keep:
            if dets[j].label != dets[i].label:
                continue
            if rotated_iou(dets[j].box, dets[i].box) > cfg.iou_threshold:
                ok = False
                break
        if ok:
            keep.append(i)
    return [dets[i] for i in keep]


def brute_force_assign(anchors, gt, pos_thresh=0.7, neg_thresh=0.3):
    """Reference assignment as (category, matched_gt, iou) tuples."""
    n, m = len(anchors), len(gt)
    if m == 0:
        return [("negative", None, 0.0)] * n
    iou = [[rotated_iou(anchors[i], gt[j]) for j in range(m)] for i in range(n)]
    out = []
    forced = set()
    for j in range(m):
        best, best_i = 0.0, -1
        for i in range(n):
            if iou[i][j] > best:
                best, best_i = iou[i][j], i
        if best > 0.0:
            forced.add(best_i)
    for i in range(n):
        best, best_j = 0.0, None
        for j in range(m):
            if iou[i][j] > best:
                best, best_j = iou[i][j], j
        if best > pos_thresh or i in forced:
            cat = "positive"
        elif best < neg_thresh:
            cat = "negative"
        else:
            cat = "neutral"
        out.append((cat, best_j, best))
    return out


def finite_difference(f, x: list[float], i: int, step: float = 1e-6) -> float:
    hi = list(x)
    lo = list(x)
    hi[i] += step
    lo[i] -= step
    return (f(hi) - f(lo)) / (2 * step)
