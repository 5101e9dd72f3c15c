"""Rotation augmentation: rotated slap rasters with transformed ground truth.

A rotation by ``alpha`` degrees turns the image content clockwise on
screen and adds ``alpha`` to every box angle; box centers move rigidly,
widths and heights and labels never change.  Under the ``expand`` canvas
policy the output canvas grows to the rotated bounding extent (background
filled white); under ``crop`` the canvas keeps its size and corners are
lost.

Sampling angles for a whole dataset uses a counter-based generator keyed
by (seed, slap_id, sample_index), so augmentation is reproducible and
order-independent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset_io import AnnotatedSlap, LabeledBox
from .geometry import RotatedBox, rotation_matrix, wrap_degrees
from .imaging import WHITE, sample_affine, to_uint8

CANVAS_POLICIES = ("expand", "crop")


@dataclass(frozen=True)
class AugmentationSpec:
    angle_min: float = -90.0
    angle_max: float = 90.0
    samples_per_slap: int = 1
    rng_seed: int = 0
    canvas_policy: str = "expand"

    def __post_init__(self) -> None:
        if not (-90.0 <= self.angle_min <= self.angle_max <= 90.0):
            raise ValueError("need -90 <= angle_min <= angle_max <= 90")
        if self.samples_per_slap < 1:
            raise ValueError("samples_per_slap must be >= 1")
        if self.canvas_policy not in CANVAS_POLICIES:
            raise ValueError(f"canvas_policy must be one of {CANVAS_POLICIES}")


def rotated_canvas_size(w: int, h: int, alpha: float) -> tuple[int, int]:
    a = math.radians(alpha)
    c, s = abs(math.cos(a)), abs(math.sin(a))
    # tolerance keeps ceil from picking up an extra pixel at exact 0/90
    eps = 1e-9
    return math.ceil(w * c + h * s - eps), math.ceil(w * s + h * c - eps)


def transform_box(
    box: RotatedBox,
    alpha: float,
    center_in: tuple[float, float],
    center_out: tuple[float, float],
) -> RotatedBox:
    """Map a box through a rotation by alpha about center_in onto a canvas
    whose center sits at center_out; w and h are untouched."""
    m00, m01, m10, m11 = rotation_matrix(alpha)
    dx, dy = box.x_c - center_in[0], box.y_c - center_in[1]
    return RotatedBox(
        x_c=center_out[0] + m00 * dx + m01 * dy,
        y_c=center_out[1] + m10 * dx + m11 * dy,
        w=box.w,
        h=box.h,
        theta=wrap_degrees(box.theta + alpha),
    )


def rotate_slap(
    image: np.ndarray,
    gt: list[LabeledBox],
    alpha: float,
    policy: str = "expand",
) -> tuple[np.ndarray, list[LabeledBox], float]:
    """Rotate one slap raster and its ground truth by alpha degrees."""
    if abs(alpha) > 90.0:
        raise ValueError(f"rotation angle {alpha} outside [-90, 90]")
    if policy not in CANVAS_POLICIES:
        raise ValueError(f"canvas_policy must be one of {CANVAS_POLICIES}")
    if image.size == 0:
        raise ValueError("empty image")
    h, w = image.shape
    if policy == "expand":
        out_w, out_h = rotated_canvas_size(w, h, alpha)
    else:
        out_w, out_h = w, h
    center_in = (w / 2.0, h / 2.0)
    center_out = (out_w / 2.0, out_h / 2.0)

    # Pixels move by R(alpha); sampling runs the inverse map.
    m00, m01, m10, m11 = rotation_matrix(-alpha)
    tx = center_in[0] - (m00 * center_out[0] + m01 * center_out[1])
    ty = center_in[1] - (m10 * center_out[0] + m11 * center_out[1])
    rotated = to_uint8(
        sample_affine(image, (m00, m01, m10, m11), (tx, ty), out_h, out_w, fill=WHITE)
    )
    boxes = [
        LabeledBox(transform_box(lb.box, alpha, center_in, center_out), lb.label, dict(lb.extras))
        for lb in gt
    ]
    return rotated, boxes, alpha


def draw_angle(seed: int, slap_id: str, index: int, lo: float, hi: float) -> float:
    """Uniform angle in [lo, hi) from a counter-based generator.

    The value depends only on (seed, slap_id, index), never on call order,
    so parallel augmentation stays reproducible.
    """
    digest = hashlib.sha256(f"{seed}\x1f{slap_id}\x1f{index}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2.0**64
    return lo + u * (hi - lo)


def augment_dataset(
    dataset: list[tuple[AnnotatedSlap, np.ndarray]],
    spec: AugmentationSpec,
) -> list[tuple[AnnotatedSlap, np.ndarray]]:
    """Emit samples_per_slap rotated copies of every slap, with provenance."""
    out = []
    seen_ids = set()
    for slap, image in dataset:
        for k in range(spec.samples_per_slap):
            alpha = draw_angle(spec.rng_seed, slap.slap_id, k, spec.angle_min, spec.angle_max)
            rotated, boxes, _ = rotate_slap(image, list(slap.boxes), alpha, spec.canvas_policy)
            new_id = f"{slap.slap_id}_aug{k:03d}"
            if new_id in seen_ids:
                raise ValueError(f"duplicate augmented slap_id {new_id}")
            seen_ids.add(new_id)
            record = replace(
                slap,
                slap_id=new_id,
                image_path=f"images/{new_id}.png",
                provenance={"kind": "augmented", "source_id": slap.slap_id, "alpha": alpha},
                boxes=tuple(boxes),
            )
            out.append((record, rotated))
    return out
