"""Deterministic synthetic slap generator with exact ground truth.

Each fingerprint is an elliptical patch of sinusoidal ridge texture placed
at an anatomically ordered x-position.  The texture's orientation, phase
and size are keyed by (seed, subject, finger), so two sessions of the same
subject produce correlated ridge patterns (genuine pairs score high under
the correlation scorer) while placement jitter is keyed per session.
Ridges are dark on a white background, like a real slap scan.

The generator keeps each pristine pre-placement patch so crop extraction
can be checked against the exact texture it should recover.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset_io import AnnotatedSlap, LabeledBox
from .geometry import RotatedBox, rotated_iou, rotation_matrix
from .imaging import sample_affine, to_uint8
from .metrics import FingerRecord
from .postprocess import extract_crop

SizeRange = tuple[tuple[float, float], tuple[float, float]]  # ((w_lo, w_hi), (h_lo, h_hi))

HAND_LAYOUTS: dict[str, tuple[str, ...]] = {
    # Palm-down on the platen, fingers listed left to right.
    "right": ("Right-Index", "Right-Middle", "Right-Ring", "Right-Little"),
    "left": ("Left-Little", "Left-Ring", "Left-Middle", "Left-Index"),
    "thumbs": ("Left-Thumb", "Right-Thumb"),
}


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int
    hands: tuple[str, ...] = ("left", "right", "thumbs")
    age_mix: float = 0.4
    image_size: tuple[int, int] = (1600, 1000)  # (width, height)
    ridge_period: float = 12.0
    finger_size_ranges: dict[str, SizeRange] = field(
        default_factory=lambda: {
            "child": ((140.0, 190.0), (180.0, 240.0)),
            "adult": ((220.0, 280.0), (280.0, 360.0)),
        }
    )
    center_jitter: float = 25.0
    angle_jitter: float = 10.0
    rng_seed: int = 0
    session: str = "a"

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ValueError("need at least one subject")
        if not set(self.hands) <= {"left", "right", "thumbs"}:
            raise ValueError("hands must be a subset of {left, right, thumbs}")
        if not 0.0 <= self.age_mix <= 1.0:
            raise ValueError("age_mix must lie in [0, 1]")
        for group in ("child", "adult"):
            (w_lo, w_hi), (h_lo, h_hi) = self.finger_size_ranges[group]
            if not (0 < w_lo <= w_hi and 0 < h_lo <= h_hi):
                raise ValueError(f"bad finger size range for {group}")
        child_w, child_h = self.finger_size_ranges["child"]
        adult_w, adult_h = self.finger_size_ranges["adult"]
        if not (child_w[1] < adult_w[0] and child_h[1] < adult_h[0]):
            raise ValueError("child finger sizes must be strictly smaller than adult sizes")
        if self.ridge_period <= 2.0:
            raise ValueError("ridge_period must exceed 2 px")


@dataclass
class SynthDataset:
    slaps: list[AnnotatedSlap]
    images: dict[str, np.ndarray]
    patches: dict[tuple[str, str], np.ndarray]  # (slap_id, label) -> pristine raster


def _unit(seed: int, *parts: object) -> float:
    """Deterministic uniform [0, 1) keyed by the seed and the parts."""
    text = "\x1f".join(str(p) for p in (seed, *parts))
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def _texture_params(spec: SynthSpec, subject: str, label: str) -> tuple[float, float]:
    """Ridge orientation (radians) and phase shared by all sessions."""
    phi = _unit(spec.rng_seed, "tex-ori", subject, label) * math.pi
    phase = _unit(spec.rng_seed, "tex-phase", subject, label) * 2.0 * math.pi
    # Small per-session drift keeps genuine pairs correlated but not identical.
    phase += (_unit(spec.rng_seed, "session-phase", spec.session, subject, label) - 0.5) * 0.6
    return phi, phase


def _finger_size(spec: SynthSpec, age_group: str, subject: str, label: str) -> tuple[float, float]:
    (w_lo, w_hi), (h_lo, h_hi) = spec.finger_size_ranges[age_group]
    w = w_lo + _unit(spec.rng_seed, "size-w", subject, label) * (w_hi - w_lo)
    h = h_lo + _unit(spec.rng_seed, "size-h", subject, label) * (h_hi - h_lo)
    return w, h


def ridge_values(
    u: np.ndarray, v: np.ndarray, w: float, h: float, phi: float, phase: float, period: float
) -> np.ndarray:
    """Texture intensity (0..255 floats) at box-local coordinates (u, v).

    An elliptical window inscribed in the w x h box carries a sinusoidal
    ridge pattern; outside the ellipse the value is white.
    """
    rho = np.sqrt((u / (w / 2.0)) ** 2 + (v / (h / 2.0)) ** 2)
    window = np.clip((1.0 - rho) * 4.0, 0.0, 1.0)
    wave = np.sin(2.0 * math.pi * (u * math.cos(phi) + v * math.sin(phi)) / period + phase)
    darkness = 150.0 * (0.5 + 0.5 * wave) * window
    return 255.0 - darkness


def pristine_patch(w: float, h: float, phi: float, phase: float, period: float) -> np.ndarray:
    """The axis-aligned ceil(w) x ceil(h) raster a perfect crop would recover."""
    out_w, out_h = math.ceil(w), math.ceil(h)
    u = (np.arange(out_w, dtype=np.float64) + 0.5)[None, :] - out_w / 2.0
    v = (np.arange(out_h, dtype=np.float64) + 0.5)[:, None] - out_h / 2.0
    u, v = np.broadcast_arrays(u, v)
    return to_uint8(ridge_values(u, v, w, h, phi, phase, period))


def _paint_finger(
    canvas: np.ndarray, box: RotatedBox, phi: float, phase: float, period: float
) -> None:
    h_img, w_img = canvas.shape
    half_diag = math.hypot(box.w, box.h) / 2.0
    c0 = max(0, math.floor(box.x_c - half_diag))
    c1 = min(w_img, math.ceil(box.x_c + half_diag))
    r0 = max(0, math.floor(box.y_c - half_diag))
    r1 = min(h_img, math.ceil(box.y_c + half_diag))
    if c0 >= c1 or r0 >= r1:
        return
    xs = (np.arange(c0, c1, dtype=np.float64) + 0.5)[None, :] - box.x_c
    ys = (np.arange(r0, r1, dtype=np.float64) + 0.5)[:, None] - box.y_c
    m00, m01, m10, m11 = rotation_matrix(-box.theta)
    u = m00 * xs + m01 * ys
    v = m10 * xs + m11 * ys
    values = ridge_values(u, v, box.w, box.h, phi, phase, period)
    region = canvas[r0:r1, c0:c1]
    np.minimum(region, values, out=region)


def _place_fingers(
    spec: SynthSpec, subject: str, hand: str, age_group: str
) -> list[tuple[str, RotatedBox]]:
    labels = HAND_LAYOUTS[hand]
    img_w, img_h = spec.image_size
    slot_w = img_w / len(labels)
    for attempt in range(100):
        placed = []
        for k, label in enumerate(labels):
            w, h = _finger_size(spec, age_group, subject, label)
            jx = (_unit(spec.rng_seed, "jx", spec.session, subject, hand, label, attempt) - 0.5)
            jy = (_unit(spec.rng_seed, "jy", spec.session, subject, hand, label, attempt) - 0.5)
            ja = (_unit(spec.rng_seed, "ja", spec.session, subject, hand, label, attempt) - 0.5)
            box = RotatedBox(
                x_c=(k + 0.5) * slot_w + 2.0 * jx * spec.center_jitter,
                y_c=img_h / 2.0 + 2.0 * jy * spec.center_jitter,
                w=w,
                h=h,
                theta=2.0 * ja * spec.angle_jitter,
            )
            placed.append((label, box))
        overlaps = any(
            rotated_iou(a, b) > 0.02
            for i, (_, a) in enumerate(placed)
            for _, b in placed[i + 1:]
        )
        if not overlaps:
            return placed
    raise RuntimeError(f"could not place fingers without overlap for {subject}/{hand}")


def generate(spec: SynthSpec) -> SynthDataset:
    """Render every subject/hand slap with exact ground truth."""
    img_w, img_h = spec.image_size
    n_children = round(spec.age_mix * spec.n_subjects)
    slaps: list[AnnotatedSlap] = []
    images: dict[str, np.ndarray] = {}
    patches: dict[tuple[str, str], np.ndarray] = {}

    for idx in range(spec.n_subjects):
        subject = f"s{idx:04d}"
        age_group = "child" if idx < n_children else "adult"
        for hand in spec.hands:
            slap_id = f"{subject}_{hand}_{spec.session}"
            canvas = np.full((img_h, img_w), 255.0, dtype=np.float64)
            boxes = []
            for label, box in _place_fingers(spec, subject, hand, age_group):
                phi, phase = _texture_params(spec, subject, label)
                _paint_finger(canvas, box, phi, phase, spec.ridge_period)
                patches[(slap_id, label)] = pristine_patch(
                    box.w, box.h, phi, phase, spec.ridge_period
                )
                boxes.append(LabeledBox(box, label))
            slaps.append(
                AnnotatedSlap(
                    slap_id=slap_id,
                    image_path=f"images/{slap_id}.png",
                    hand=hand,
                    age_group=age_group,
                    ppi=500,
                    provenance={"kind": "plain"},
                    boxes=tuple(boxes),
                    extras={"subject_id": subject, "session": spec.session},
                )
            )
            images[slap_id] = to_uint8(canvas)
    return SynthDataset(slaps=slaps, images=images, patches=patches)


def synth_scorer(crop_a: np.ndarray, crop_b: np.ndarray, size: int = 64) -> float:
    """Normalized cross-correlation of two crops after resize to a common grid."""
    if crop_a.size == 0 or crop_b.size == 0:
        raise ValueError("empty crop")
    a = _resize(crop_a, size)
    b = _resize(crop_b, size)
    a -= a.mean()
    b -= b.mean()
    denom = math.sqrt(float((a * a).sum()) * float((b * b).sum()))
    if denom == 0.0:
        return 0.0
    return float((a * b).sum() / denom)


def _resize(image: np.ndarray, size: int) -> np.ndarray:
    h, w = image.shape
    return sample_affine(
        image, (w / size, 0.0, 0.0, h / size), (0.0, 0.0), size, size, fill=255
    )


def finger_records(dataset: SynthDataset) -> list[FingerRecord]:
    """Crop every ground-truth box and wrap it for trial building."""
    records = []
    for slap in dataset.slaps:
        subject = slap.extras["subject_id"]
        for lb in slap.boxes:
            crop = extract_crop(dataset.images[slap.slap_id], lb.box)
            records.append(
                FingerRecord(
                    finger_id=f"{slap.slap_id}:{lb.label}",
                    subject_id=subject,
                    label=lb.label,
                    payload=crop,
                )
            )
    return records


def correlation_scorer(a: FingerRecord, b: FingerRecord) -> float:
    return synth_scorer(a.payload, b.payload)
