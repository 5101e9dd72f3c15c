"""Detection post-processing: score filtering, rotated NMS, crop extraction.

NMS is greedy and per-label: fingerprints of different fingers legitimately
sit adjacent, so only same-label overlaps suppress each other.  Crops are
rectified by sampling the source along the box axes at 1:1 pixel scale, so
the output raster is axis-aligned and keeps the scanner resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset_io import ScoredBox
from .geometry import PreparedBox, RotatedBox, intersection_area, iou_prepared, rotation_matrix
from .imaging import WHITE, sample_affine, to_uint8


@dataclass(frozen=True)
class NmsConfig:
    score_threshold: float = 0.7
    iou_threshold: float = 0.5
    max_keep: int = 1000

    def __post_init__(self) -> None:
        if not (0.0 <= self.score_threshold <= 1.0 and 0.0 <= self.iou_threshold <= 1.0):
            raise ValueError("thresholds must lie in [0, 1]")
        if self.max_keep < 1:
            raise ValueError("max_keep must be >= 1")


def rotated_nms(dets: list[ScoredBox], cfg: NmsConfig = NmsConfig()) -> list[ScoredBox]:
    """Greedy per-label non-maximum suppression.

    Detections below the score threshold are dropped first.  Survivors are
    emitted in descending-score order (ties break toward the lower input
    index), capped at ``max_keep``.
    """
    candidates = [
        (d, i, PreparedBox(d.box)) for i, d in enumerate(dets) if d.score >= cfg.score_threshold
    ]
    candidates.sort(key=lambda c: (-c[0].score, c[1]))
    kept: list[tuple[ScoredBox, PreparedBox]] = []
    for det, _, prepared in candidates:
        if len(kept) >= cfg.max_keep:
            break
        suppressed = False
        for kept_det, kept_prepared in kept:
            if kept_det.label != det.label:
                continue
            if iou_prepared(kept_prepared, prepared) > cfg.iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append((det, prepared))
    return [det for det, _ in kept]


def extract_crop(image: np.ndarray, box: RotatedBox, fill: int = WHITE) -> np.ndarray:
    """Upright ceil(w) x ceil(h) raster of the box contents.

    The source is sampled by inverse rotation about the box center with
    bilinear interpolation at 1:1 pixel scale; samples outside the image
    read ``fill``.  Raises when the box lies entirely outside the image.
    """
    h_img, w_img = image.shape
    if not _box_touches_image(box, w_img, h_img):
        raise ValueError("box lies entirely outside the image")
    out_w = math.ceil(box.w)
    out_h = math.ceil(box.h)
    # Output center (out_w/2, out_h/2) maps to the box center; axes follow theta.
    m00, m01, m10, m11 = rotation_matrix(box.theta)
    tx = box.x_c - (m00 * out_w / 2.0 + m01 * out_h / 2.0)
    ty = box.y_c - (m10 * out_w / 2.0 + m11 * out_h / 2.0)
    return to_uint8(sample_affine(image, (m00, m01, m10, m11), (tx, ty), out_h, out_w, fill=fill))


def _box_touches_image(box: RotatedBox, w_img: int, h_img: int) -> bool:
    image_box = RotatedBox(w_img / 2.0, h_img / 2.0, float(w_img), float(h_img), 0.0)
    return intersection_area(box, image_box) > 0.0
