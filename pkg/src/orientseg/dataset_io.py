"""Annotation and prediction file formats, validation, and the label vocabulary.

Both file kinds are JSONL: one UTF-8 JSON object per line, LF endings.
Annotation records:

    {"schema_version":1,"slap_id":...,"image_path":...,"hand":...,
     "age_group":...,"ppi":...,"provenance":{...},"boxes":[...]}

with each box ``{"xc","yc","w","h","theta_deg","label"}``.  Prediction
records drop hand/age metadata requirements and add a ``"score"`` per box.
Angles are degrees, coordinates pixels; numbers round-trip exactly because
the writer uses shortest-repr floats.  Unknown fields are carried through
load/save untouched, after the known fields, in file order.

The canonical on-disk form is exactly what :func:`save_annotations` emits;
``save(load(x))`` is byte-identical for canonically formatted input.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from .geometry import RotatedBox

SCHEMA_VERSION = 1

FINGER_LABELS = (
    "Left-Index",
    "Left-Middle",
    "Left-Ring",
    "Left-Little",
    "Left-Thumb",
    "Right-Index",
    "Right-Middle",
    "Right-Ring",
    "Right-Little",
    "Right-Thumb",
)

HANDS = ("left", "right", "thumbs", "unknown")
AGE_GROUPS = ("child", "adult")
PROVENANCE_KINDS = ("plain", "augmented", "difficult")

MAX_BOXES_PER_SLAP = 5


class DatasetError(ValueError):
    """Malformed or invariant-violating dataset content."""


@dataclass(frozen=True)
class LabeledBox:
    box: RotatedBox
    label: str
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScoredBox:
    box: RotatedBox
    label: str
    score: float
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AnnotatedSlap:
    slap_id: str
    image_path: str
    hand: str
    age_group: str
    ppi: int
    provenance: dict[str, Any]
    boxes: tuple[LabeledBox, ...]
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PredictedSlap:
    slap_id: str
    detections: tuple[ScoredBox, ...]
    extras: dict[str, Any] = field(default_factory=dict)


def validate_against_hand(slap: AnnotatedSlap) -> list[str]:
    """Hand/label consistency violations; empty when consistent.

    ``unknown`` hands skip the label-side checks so prediction-style
    records without hand information stay expressible.
    """
    violations = []
    if slap.hand == "unknown":
        return violations
    for lb in slap.boxes:
        if slap.hand == "left" and not lb.label.startswith("Left-"):
            violations.append(f"label {lb.label} on a left-hand slap")
        elif slap.hand == "right" and not lb.label.startswith("Right-"):
            violations.append(f"label {lb.label} on a right-hand slap")
        elif slap.hand == "thumbs" and not lb.label.endswith("-Thumb"):
            violations.append(f"label {lb.label} on a thumbs slap")
    return violations


def validate_slap(slap: AnnotatedSlap) -> list[str]:
    """All record-level invariant violations for one annotated slap."""
    violations = []
    if slap.hand not in HANDS:
        violations.append(f"unknown hand value {slap.hand!r}")
    if slap.age_group not in AGE_GROUPS:
        violations.append(f"unknown age_group value {slap.age_group!r}")
    if not isinstance(slap.ppi, int) or slap.ppi <= 0:
        violations.append(f"ppi must be a positive integer, got {slap.ppi!r}")
    kind = slap.provenance.get("kind")
    if kind not in PROVENANCE_KINDS:
        violations.append(f"unknown provenance kind {kind!r}")
    elif kind == "augmented":
        if "source_id" not in slap.provenance or "alpha" not in slap.provenance:
            violations.append("augmented provenance requires source_id and alpha")
    if len(slap.boxes) > MAX_BOXES_PER_SLAP:
        violations.append(f"{len(slap.boxes)} boxes exceed the limit of {MAX_BOXES_PER_SLAP}")
    seen = set()
    for lb in slap.boxes:
        if lb.label not in FINGER_LABELS:
            violations.append(f"unknown finger label {lb.label!r}")
            continue
        if lb.label in seen:
            violations.append(f"duplicate label {lb.label}")
        seen.add(lb.label)
        if not (-90.0 <= lb.box.theta < 90.0):
            violations.append(f"{lb.label}: theta {lb.box.theta} outside [-90, 90)")
    violations.extend(validate_against_hand(slap))
    return violations


_BOX_KEYS = ("xc", "yc", "w", "h", "theta_deg", "label")
_SLAP_KEYS = (
    "schema_version",
    "slap_id",
    "image_path",
    "hand",
    "age_group",
    "ppi",
    "provenance",
    "boxes",
)


def _box_from_obj(obj: dict[str, Any], want_score: bool) -> LabeledBox | ScoredBox:
    for key in _BOX_KEYS:
        if key not in obj:
            raise DatasetError(f"box missing field {key!r}")
    try:
        box = RotatedBox(
            float(obj["xc"]), float(obj["yc"]), float(obj["w"]), float(obj["h"]),
            float(obj["theta_deg"]),
        )
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"invalid box geometry: {exc}") from exc
    known = set(_BOX_KEYS) | ({"score"} if want_score else set())
    extras = {k: v for k, v in obj.items() if k not in known}
    if want_score:
        if "score" not in obj:
            raise DatasetError("prediction box missing field 'score'")
        score = float(obj["score"])
        if not 0.0 <= score <= 1.0:
            raise DatasetError(f"score {score} outside [0, 1]")
        return ScoredBox(box, str(obj["label"]), score, extras)
    return LabeledBox(box, str(obj["label"]), extras)


def _box_to_obj(lb: LabeledBox | ScoredBox) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "xc": float(lb.box.x_c),
        "yc": float(lb.box.y_c),
        "w": float(lb.box.w),
        "h": float(lb.box.h),
        "theta_deg": float(lb.box.theta),
        "label": lb.label,
    }
    if isinstance(lb, ScoredBox):
        obj["score"] = float(lb.score)
    obj.update(lb.extras)
    return obj


def slap_from_obj(obj: dict[str, Any]) -> AnnotatedSlap:
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema_version {obj.get('schema_version')!r}")
    for key in _SLAP_KEYS:
        if key not in obj:
            raise DatasetError(f"record missing field {key!r}")
    boxes = tuple(_box_from_obj(b, want_score=False) for b in obj["boxes"])
    extras = {k: v for k, v in obj.items() if k not in _SLAP_KEYS}
    slap = AnnotatedSlap(
        slap_id=str(obj["slap_id"]),
        image_path=str(obj["image_path"]),
        hand=str(obj["hand"]),
        age_group=str(obj["age_group"]),
        ppi=obj["ppi"],
        provenance=dict(obj["provenance"]),
        boxes=boxes,
        extras=extras,
    )
    violations = validate_slap(slap)
    if violations:
        raise DatasetError(f"slap {slap.slap_id}: " + "; ".join(violations))
    return slap


def slap_to_obj(slap: AnnotatedSlap) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "slap_id": slap.slap_id,
        "image_path": slap.image_path,
        "hand": slap.hand,
        "age_group": slap.age_group,
        "ppi": slap.ppi,
        "provenance": slap.provenance,
        "boxes": [_box_to_obj(b) for b in slap.boxes],
    }
    obj.update(slap.extras)
    return obj


def prediction_from_obj(obj: dict[str, Any]) -> PredictedSlap:
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema_version {obj.get('schema_version')!r}")
    if "slap_id" not in obj or "boxes" not in obj:
        raise DatasetError("prediction record needs slap_id and boxes")
    dets = tuple(_box_from_obj(b, want_score=True) for b in obj["boxes"])
    scores = [d.score for d in dets]
    if scores != sorted(scores, reverse=True):
        raise DatasetError(f"slap {obj['slap_id']}: detections not sorted by descending score")
    extras = {k: v for k, v in obj.items() if k not in ("schema_version", "slap_id", "boxes")}
    return PredictedSlap(slap_id=str(obj["slap_id"]), detections=dets, extras=extras)


def prediction_to_obj(pred: PredictedSlap) -> dict[str, Any]:
    dets = sorted(pred.detections, key=lambda d: -d.score)
    obj: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "slap_id": pred.slap_id,
        "boxes": [_box_to_obj(d) for d in dets],
    }
    obj.update(pred.extras)
    return obj


def _load_jsonl(path: str | Path) -> Iterable[tuple[int, dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: record is not an object")
            yield lineno, obj


def load_annotations(path: str | Path) -> list[AnnotatedSlap]:
    out = []
    seen_ids = set()
    for lineno, obj in _load_jsonl(path):
        try:
            slap = slap_from_obj(obj)
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        if slap.slap_id in seen_ids:
            raise DatasetError(f"{path}:{lineno}: duplicate slap_id {slap.slap_id}")
        seen_ids.add(slap.slap_id)
        out.append(slap)
    return out


def load_predictions(path: str | Path) -> list[PredictedSlap]:
    out = []
    for lineno, obj in _load_jsonl(path):
        try:
            out.append(prediction_from_obj(obj))
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return out


def dumps_record(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=True, separators=(",", ":"))


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a torn file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_annotations(path: str | Path, slaps: Iterable[AnnotatedSlap]) -> None:
    text = "".join(dumps_record(slap_to_obj(s)) + "\n" for s in slaps)
    atomic_write_text(path, text)


def save_predictions(path: str | Path, preds: Iterable[PredictedSlap]) -> None:
    text = "".join(dumps_record(prediction_to_obj(p)) + "\n" for p in preds)
    atomic_write_text(path, text)


ANNOTATIONS_FILENAME = "annotations.jsonl"


def load_dataset(root: str | Path):
    """Load a dataset directory: annotations.jsonl plus its PNG images.

    Image paths in the records are relative to the dataset root.  Returns
    a list of (AnnotatedSlap, raster) pairs in file order.
    """
    from .imaging import load_png

    root = Path(root)
    slaps = load_annotations(root / ANNOTATIONS_FILENAME)
    return [(slap, load_png(root / slap.image_path)) for slap in slaps]


def save_dataset(root: str | Path, items) -> None:
    """Write annotations.jsonl and the PNG images under a dataset root."""
    from .imaging import save_png

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for slap, image in items:
        target = root / slap.image_path
        target.parent.mkdir(parents=True, exist_ok=True)
        save_png(target, image)
    save_annotations(root / ANNOTATIONS_FILENAME, [slap for slap, _ in items])


def label_set(slap: AnnotatedSlap | PredictedSlap) -> frozenset[str]:
    """The set of finger labels present on a slap record."""
    if isinstance(slap, AnnotatedSlap):
        return frozenset(b.label for b in slap.boxes)
    return frozenset(d.label for d in slap.detections)


def find_slap(slaps: Iterable[AnnotatedSlap], slap_id: str) -> Optional[AnnotatedSlap]:
    for s in slaps:
        if s.slap_id == slap_id:
            return s
    return None
