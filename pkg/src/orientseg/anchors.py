"""Oriented anchor generation over feature-map grids and gt assignment.

Anchors tile a grid of cells, one set of K = |orientations| x |scales| x
|ratios| boxes per cell, centered at ((i + 0.5) * stride, (j + 0.5) * stride).
Width/height for scale s and ratio r = w:h use the area-preserving
convention w = s * sqrt(r), h = s / sqrt(r), so every anchor of scale s has
area s^2.

Assignment against ground truth is three-way: positive above the IoU
threshold or as a ground-truth box's best anchor, negative below the lower
threshold, neutral in between.  Neutral anchors carry no loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import RotatedBox, pairwise_iou

DEFAULT_ORIENTATIONS = (-45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0)
DEFAULT_SCALES = (128.0, 256.0, 512.0)
DEFAULT_RATIOS = (1.0, 0.5, 2.0)  # w:h of 1:1, 1:2, 2:1

POSITIVE = "positive"
NEGATIVE = "negative"
NEUTRAL = "neutral"


@dataclass(frozen=True)
class AnchorConfig:
    orientations: tuple[float, ...] = DEFAULT_ORIENTATIONS
    scales: tuple[float, ...] = DEFAULT_SCALES
    aspect_ratios: tuple[float, ...] = DEFAULT_RATIOS
    stride: float = 16.0
    grid_w: int = 1
    grid_h: int = 1

    def __post_init__(self) -> None:
        if not (self.orientations and self.scales and self.aspect_ratios):
            raise ValueError("orientations, scales and aspect_ratios must be non-empty")
        if any(s <= 0 for s in self.scales) or any(r <= 0 for r in self.aspect_ratios):
            raise ValueError("scales and aspect ratios must be positive")
        if self.stride <= 0:
            raise ValueError("stride must be positive")
        if self.grid_w < 1 or self.grid_h < 1:
            raise ValueError("grid must have at least one cell per side")

    @property
    def anchors_per_cell(self) -> int:
        return len(self.orientations) * len(self.scales) * len(self.aspect_ratios)


@dataclass(frozen=True)
class AnchorAssignment:
    anchor_index: int
    category: str
    matched_gt: Optional[int]
    iou: float


def generate_anchors(cfg: AnchorConfig) -> list[RotatedBox]:
    """All anchors of the grid in deterministic order.

    Cells are iterated row-major (j, then i), and within a cell the order
    is orientation, then scale, then ratio.
    """
    shapes = []
    for theta in cfg.orientations:
        for s in cfg.scales:
            for r in cfg.aspect_ratios:
                sqrt_r = math.sqrt(r)
                shapes.append((s * sqrt_r, s / sqrt_r, theta))
    anchors = []
    for j in range(cfg.grid_h):
        cy = (j + 0.5) * cfg.stride
        for i in range(cfg.grid_w):
            cx = (i + 0.5) * cfg.stride
            for w, h, theta in shapes:
                anchors.append(RotatedBox(cx, cy, w, h, theta))
    return anchors


def assign_anchors(
    anchors: Sequence[RotatedBox],
    gt: Sequence[RotatedBox],
    pos_thresh: float = 0.7,
    neg_thresh: float = 0.3,
) -> list[AnchorAssignment]:
    """Classify every anchor as positive, negative or neutral against gt.

    An anchor is positive when its best IoU exceeds ``pos_thresh`` or when
    it is the argmax-IoU anchor of some ground-truth box (even if that IoU
    is below ``neg_thresh``: coverage wins).  Ties break toward the lower
    index.  ``matched_gt`` is always the anchor's own best-overlap gt.
    With no ground truth every anchor is negative.
    """
    if not pos_thresh > neg_thresh:
        raise ValueError("pos_thresh must exceed neg_thresh")
    n, m = len(anchors), len(gt)
    if m == 0:
        return [AnchorAssignment(i, NEGATIVE, None, 0.0) for i in range(n)]

    iou_matrix = pairwise_iou(list(anchors), list(gt))
    best_iou = [0.0] * n
    best_gt = [-1] * n
    gt_best_iou = [0.0] * m
    gt_best_anchor = [-1] * m
    for i in range(n):
        row = iou_matrix[i]
        for j in range(m):
            iou = row[j]
            if iou > best_iou[i]:
                best_iou[i] = iou
                best_gt[i] = j
            if iou > gt_best_iou[j]:
                gt_best_iou[j] = iou
                gt_best_anchor[j] = i

    forced_positive = {a for a, iou in zip(gt_best_anchor, gt_best_iou) if iou > 0.0}

    out = []
    for i in range(n):
        matched = best_gt[i] if best_iou[i] > 0.0 else None
        if best_iou[i] > pos_thresh or i in forced_positive:
            category = POSITIVE
        elif best_iou[i] < neg_thresh:
            category = NEGATIVE
        else:
            category = NEUTRAL
        out.append(AnchorAssignment(i, category, matched, best_iou[i]))
    return out
