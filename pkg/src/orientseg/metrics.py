"""Evaluation suite: per-side pixel errors, angle error, label accuracy,
verification ROC with TAR/FAR, and geometric tolerance checks.

Per-side errors compare each predicted box side against the infinite line
through the corresponding ground-truth side: the unsigned error is the
mean of the two endpoint perpendicular distances, and the sign is positive
when the predicted side's midpoint sits outside the ground-truth box along
that side's outward normal (over-segmentation) and negative when it sits
inside (under-segmentation).

Side identity comes from the box-local frame (top/bottom perpendicular to
the height axis, left/right perpendicular to the width axis).  Because a
rectangle is 180-degree symmetric, the prediction's frame is first aligned
to the ground truth's by wrapping their angle difference into [-90, 90),
so a -89 vs +89 degree pair is treated as 2 degrees apart, never 178.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .dataset_io import (
    AnnotatedSlap,
    DatasetError,
    PredictedSlap,
    atomic_write_text,
    dumps_record,
    label_set,
)
from .geometry import RotatedBox, rotation_matrix, to_quad, wrap_degrees

SIDES = ("left", "right", "top", "bottom")

# SlapSeg-II geometric tolerance limits: under-segmentation is bounded at
# -32 px on left/right and -64 px on top/bottom; over-segmentation is not.
GTL_LEFT_RIGHT = -32.0
GTL_TOP_BOTTOM = -64.0


@dataclass(frozen=True)
class SideErrors:
    left: float
    right: float
    top: float
    bottom: float

    def as_dict(self) -> dict[str, float]:
        return {"left": self.left, "right": self.right, "top": self.top, "bottom": self.bottom}


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float


@dataclass(frozen=True)
class MatchTrial:
    probe_id: str
    gallery_id: str
    genuine: bool
    score: float
    failed: bool = False


def side_errors(pred: RotatedBox, gt: RotatedBox) -> SideErrors:
    """Signed per-side pixel errors of a predicted box against ground truth."""
    gt = gt.canonicalized()
    # Represent the prediction in the frame nearest the ground truth's.
    delta = wrap_degrees(pred.theta - gt.theta)
    pred_aligned = RotatedBox(pred.x_c, pred.y_c, pred.w, pred.h, gt.theta + delta)

    qp = to_quad(pred_aligned).vertices
    qg = to_quad(gt).vertices
    # Quad order is TL, TR, BR, BL; sides as (endpoint, endpoint) pairs.
    side_vertices = {"top": (0, 1), "right": (1, 2), "bottom": (2, 3), "left": (3, 0)}
    # Outward normals of the gt sides, in the gt local frame.
    local_normals = {"top": (0.0, -1.0), "right": (1.0, 0.0), "bottom": (0.0, 1.0), "left": (-1.0, 0.0)}
    m00, m01, m10, m11 = rotation_matrix(gt.theta)

    out = {}
    for name, (i, j) in side_vertices.items():
        p1, p2 = qp[i], qp[j]
        g1, g2 = qg[i], qg[j]
        dx, dy = g2[0] - g1[0], g2[1] - g1[1]
        length = math.hypot(dx, dy)
        # cross product first, one division after: identical endpoints give
        # an exact zero instead of normalization roundoff
        d1 = abs(dx * (p1[1] - g1[1]) - dy * (p1[0] - g1[0])) / length
        d2 = abs(dx * (p2[1] - g1[1]) - dy * (p2[0] - g1[0])) / length
        unsigned = (d1 + d2) / 2.0
        nx_loc, ny_loc = local_normals[name]
        nx = m00 * nx_loc + m01 * ny_loc
        ny = m10 * nx_loc + m11 * ny_loc
        mid_x = (p1[0] + p2[0]) / 2.0 - g1[0]
        mid_y = (p1[1] + p2[1]) / 2.0 - g1[1]
        outside = mid_x * nx + mid_y * ny > 0.0
        out[name] = unsigned if outside else -unsigned
    return SideErrors(**out)


def _mean_std(values: Sequence[float]) -> MeanStd:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n  # population std
    return MeanStd(mean, math.sqrt(var))


def mae(errors: Sequence[SideErrors]) -> dict[str, MeanStd]:
    """Per-side mean and population std of the absolute errors."""
    if not errors:
        raise ValueError("mae needs at least one fingerprint")
    return {side: _mean_std([abs(getattr(e, side)) for e in errors]) for side in SIDES}


def eap(pairs: Sequence[tuple[float, float]]) -> MeanStd:
    """Mean/std absolute angle error, differences wrapped into [-90, 90)."""
    if not pairs:
        raise ValueError("eap needs at least one pair")
    return _mean_std([abs(wrap_degrees(theta_pred - theta_gt)) for theta_gt, theta_pred in pairs])


def label_accuracy(
    gt_sets: Sequence[Iterable[str]],
    pred_sets: Sequence[Iterable[str]],
    num_labels: int = 10,
) -> float:
    """1 - Hamming loss over per-slap label sets (symmetric difference / L)."""
    if len(gt_sets) != len(pred_sets):
        raise ValueError("gt and pred have different lengths")
    if not gt_sets:
        raise ValueError("need at least one slap")
    total = math.fsum(
        len(set(y) ^ set(z)) / num_labels for y, z in zip(gt_sets, pred_sets)
    )
    return 1.0 - total / len(gt_sets)


def tolerance_check(
    err: SideErrors,
    gtl_lr: float = GTL_LEFT_RIGHT,
    gtl_tb: float = GTL_TOP_BOTTOM,
) -> bool:
    """True iff under-segmentation stays within the tolerance limits (inclusive)."""
    return (
        err.left >= gtl_lr
        and err.right >= gtl_lr
        and err.top >= gtl_tb
        and err.bottom >= gtl_tb
    )


def pair_boxes(
    gt: Sequence[RotatedBox],
    pred: Sequence[RotatedBox],
    iou_floor: float = 0.1,
) -> list[tuple[int, int, float]]:
    """Greedy max-IoU one-to-one pairing of predictions to ground truth.

    Pairs below ``iou_floor`` are not formed; leftover ground truth counts
    as missed and leftover predictions as spurious.  Ties break toward
    lower indices, so the pairing is deterministic.
    """
    from .geometry import pairwise_iou

    if not gt or not pred:
        return []
    matrix = pairwise_iou(list(gt), list(pred))
    candidates = [
        (matrix[g][p], g, p)
        for g in range(len(gt))
        for p in range(len(pred))
        if matrix[g][p] >= iou_floor
    ]
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    pairs = []
    for iou, g, p in candidates:
        if g in used_gt or p in used_pred:
            continue
        used_gt.add(g)
        used_pred.add(p)
        pairs.append((g, p, iou))
    pairs.sort(key=lambda c: c[0])
    return pairs


@dataclass(frozen=True)
class RocCurve:
    """Step-function ROC: arrays indexed by descending threshold."""

    thresholds: np.ndarray
    tar: np.ndarray
    far: np.ndarray
    n_genuine: int
    n_impostor: int
    n_failed_genuine: int
    n_failed_impostor: int


def roc(trials: Sequence[MatchTrial]) -> RocCurve:
    """Sweep every distinct score as an accept threshold (score >= t accepts).

    Failed trials are rejected at every threshold but stay in the
    denominators, so a failed genuine trial permanently costs TAR.
    """
    genuine = [t for t in trials if t.genuine]
    impostor = [t for t in trials if not t.genuine]
    if not genuine or not impostor:
        raise ValueError("need at least one genuine and one impostor trial")
    g_scores = np.sort([t.score for t in genuine if not t.failed])
    i_scores = np.sort([t.score for t in impostor if not t.failed])
    thresholds = np.unique(np.concatenate([g_scores, i_scores]))[::-1]
    thresholds = np.concatenate([[np.inf], thresholds])
    g_accept = g_scores.size - np.searchsorted(g_scores, thresholds, side="left")
    i_accept = i_scores.size - np.searchsorted(i_scores, thresholds, side="left")
    return RocCurve(
        thresholds=thresholds,
        tar=g_accept / len(genuine),
        far=i_accept / len(impostor),
        n_genuine=len(genuine),
        n_impostor=len(impostor),
        n_failed_genuine=len(genuine) - g_scores.size,
        n_failed_impostor=len(impostor) - i_scores.size,
    )


def tar_at_far(curve: RocCurve, far: float) -> float:
    """TAR at the most permissive threshold whose FAR does not exceed ``far``.

    Conservative step selection: the returned operating point satisfies
    FAR <= far exactly, with no interpolation between steps.
    """
    if far < 0:
        raise ValueError("far must be nonnegative")
    idx = int(np.searchsorted(curve.far, far, side="right")) - 1
    if idx < 0:
        return 0.0
    return float(curve.tar[idx])


@dataclass(frozen=True)
class FingerRecord:
    """One segmented fingerprint with identity metadata for trial building."""

    finger_id: str
    subject_id: str
    label: str
    payload: Any = None


Scorer = Callable[[FingerRecord, FingerRecord], Optional[float]]


@dataclass(frozen=True)
class TrialSet:
    trials: tuple[MatchTrial, ...]
    impostor_shortfall: int


def build_trials(
    probes: Sequence[FingerRecord],
    gallery: Sequence[FingerRecord],
    scorer: Scorer,
    impostors_per_probe: int = 20,
    seed: int = 0,
) -> TrialSet:
    """All mated pairs plus sampled non-mated trials per probe.

    Genuine trials pair a probe with every gallery entry of the same
    subject and finger position (each ordered pair counted once).  Impostor
    candidates share the finger position but not the subject; per probe,
    ``impostors_per_probe`` of them are sampled without replacement by a
    generator keyed on (seed, probe id).  When fewer candidates exist the
    shortfall is recorded.  A scorer returning None marks the trial failed.
    """
    by_label: dict[str, list[FingerRecord]] = {}
    for g in gallery:
        by_label.setdefault(g.label, []).append(g)

    trials: list[MatchTrial] = []
    shortfall = 0
    for probe in probes:
        candidates = by_label.get(probe.label, [])
        mates = [g for g in candidates if g.subject_id == probe.subject_id]
        others = [g for g in candidates if g.subject_id != probe.subject_id]
        for mate in mates:
            trials.append(_scored_trial(probe, mate, True, scorer))
        take = min(impostors_per_probe, len(others))
        shortfall += impostors_per_probe - take
        key = int.from_bytes(
            hashlib.sha256(f"{seed}\x1f{probe.finger_id}".encode()).digest()[:8], "big"
        )
        rng = random.Random(key)
        for other in sorted(rng.sample(range(len(others)), take)):
            trials.append(_scored_trial(probe, others[other], False, scorer))
    return TrialSet(tuple(trials), shortfall)


def _scored_trial(
    probe: FingerRecord, entry: FingerRecord, genuine: bool, scorer: Scorer
) -> MatchTrial:
    score = scorer(probe, entry)
    if score is None:
        return MatchTrial(probe.finger_id, entry.finger_id, genuine, 0.0, failed=True)
    return MatchTrial(probe.finger_id, entry.finger_id, genuine, float(score), failed=False)


def calibrated_gaussian_trials(
    n_genuine: int,
    n_impostor: int,
    tpr: float = 0.9717,
    far: float = 0.001,
    seed: int = 0,
) -> list[MatchTrial]:
    """Synthetic unit-variance Gaussian score model hitting TAR ``tpr`` at ``far``.

    Impostor scores are N(0, 1); genuine scores are N(mu, 1) with mu chosen
    in closed form so that the true-positive rate at the false-positive
    rate ``far`` equals ``tpr``.
    """
    threshold = norm.ppf(1.0 - far)
    mu = float(threshold - norm.ppf(1.0 - tpr))
    rng = np.random.default_rng(seed)
    g = rng.normal(mu, 1.0, size=n_genuine)
    i = rng.normal(0.0, 1.0, size=n_impostor)
    trials = [
        MatchTrial(f"g{k}", f"g{k}'", True, float(s)) for k, s in enumerate(g)
    ]
    trials += [
        MatchTrial(f"i{k}", f"i{k}'", False, float(s)) for k, s in enumerate(i)
    ]
    return trials


def load_scores(path: str | Path) -> list[MatchTrial]:
    """Read a score file: one {"probe","gallery","genuine","score","failed"} per line."""
    trials = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                trials.append(
                    MatchTrial(
                        probe_id=str(obj["probe"]),
                        gallery_id=str(obj["gallery"]),
                        genuine=bool(obj["genuine"]),
                        score=float(obj["score"]),
                        failed=bool(obj.get("failed", False)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad trial record: {exc}") from exc
    return trials


def save_scores(path: str | Path, trials: Iterable[MatchTrial]) -> None:
    text = "".join(
        dumps_record(
            {
                "probe": t.probe_id,
                "gallery": t.gallery_id,
                "genuine": t.genuine,
                "score": 0.0 if t.failed else float(t.score),
                "failed": t.failed,
            }
        )
        + "\n"
        for t in trials
    )
    atomic_write_text(path, text)


@dataclass
class CohortSummary:
    n_slaps: int = 0
    n_gt_fingerprints: int = 0
    n_matched: int = 0
    n_missed: int = 0
    n_spurious: int = 0
    mae: Optional[dict[str, MeanStd]] = None
    eap: Optional[MeanStd] = None
    label_accuracy: Optional[float] = None
    tolerance_pass_rate: Optional[float] = None

    def to_obj(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "n_slaps": self.n_slaps,
            "n_gt_fingerprints": self.n_gt_fingerprints,
            "n_matched": self.n_matched,
            "n_missed": self.n_missed,
            "n_spurious": self.n_spurious,
            "label_accuracy": self.label_accuracy,
            "tolerance_pass_rate": self.tolerance_pass_rate,
        }
        if self.mae is not None:
            obj["mae"] = {s: {"mean": m.mean, "std": m.std} for s, m in self.mae.items()}
        else:
            obj["mae"] = None
        obj["eap"] = {"mean": self.eap.mean, "std": self.eap.std} if self.eap else None
        return obj


@dataclass
class EvalReport:
    """Per-cohort segmentation summary; the entire cohort is child + adult."""

    cohorts: dict[str, CohortSummary] = field(default_factory=dict)

    def to_obj(self) -> dict[str, Any]:
        return {"cohorts": {name: c.to_obj() for name, c in self.cohorts.items()}}


def evaluate_segmentation(
    gt_slaps: Sequence[AnnotatedSlap],
    pred_slaps: Sequence[PredictedSlap],
    iou_floor: float = 0.1,
    num_labels: int = 10,
) -> tuple[EvalReport, dict[str, list[float]], list[float]]:
    """Compare predictions to ground truth, cohort by cohort.

    Predictions are paired to ground-truth boxes per slap by greedy
    max-IoU; matched pairs contribute side errors, angle errors and
    tolerance checks, while missed ground truth counts against the
    tolerance pass rate.  Label accuracy compares per-slap label sets.
    Returns the report plus the raw signed per-side errors and angle
    errors (for histogram output).
    """
    preds_by_id = {p.slap_id: p for p in pred_slaps}

    rows: dict[str, dict[str, list]] = {
        name: {"errors": [], "pairs": [], "gt_sets": [], "pred_sets": [], "passes": [],
               "n_slaps": 0, "n_gt": 0, "n_matched": 0, "n_missed": 0, "n_spurious": 0}
        for name in ("child", "adult")
    }
    signed: dict[str, list[float]] = {s: [] for s in SIDES}
    angle_errors: list[float] = []

    for slap in gt_slaps:
        bucket = rows[slap.age_group]
        pred = preds_by_id.get(slap.slap_id)
        detections = list(pred.detections) if pred else []
        gt_boxes = [b.box for b in slap.boxes]
        pred_boxes = [d.box for d in detections]
        pairs = pair_boxes(gt_boxes, pred_boxes, iou_floor=iou_floor)

        bucket["n_slaps"] = bucket["n_slaps"] + 1
        bucket["n_gt"] = bucket["n_gt"] + len(gt_boxes)
        bucket["n_matched"] = bucket["n_matched"] + len(pairs)
        bucket["n_missed"] = bucket["n_missed"] + (len(gt_boxes) - len(pairs))
        bucket["n_spurious"] = bucket["n_spurious"] + (len(pred_boxes) - len(pairs))
        bucket["gt_sets"].append(label_set(slap))
        bucket["pred_sets"].append(frozenset(d.label for d in detections))

        for g, p, _ in pairs:
            err = side_errors(pred_boxes[p], gt_boxes[g])
            bucket["errors"].append(err)
            bucket["pairs"].append((gt_boxes[g].theta, pred_boxes[p].theta))
            bucket["passes"].append(tolerance_check(err))
            for s in SIDES:
                signed[s].append(getattr(err, s))
            angle_errors.append(abs(wrap_degrees(pred_boxes[p].theta - gt_boxes[g].theta)))

    report = EvalReport()
    merged = {
        "errors": rows["child"]["errors"] + rows["adult"]["errors"],
        "pairs": rows["child"]["pairs"] + rows["adult"]["pairs"],
        "gt_sets": rows["child"]["gt_sets"] + rows["adult"]["gt_sets"],
        "pred_sets": rows["child"]["pred_sets"] + rows["adult"]["pred_sets"],
        "passes": rows["child"]["passes"] + rows["adult"]["passes"],
        "n_slaps": rows["child"]["n_slaps"] + rows["adult"]["n_slaps"],
        "n_gt": rows["child"]["n_gt"] + rows["adult"]["n_gt"],
        "n_matched": rows["child"]["n_matched"] + rows["adult"]["n_matched"],
        "n_missed": rows["child"]["n_missed"] + rows["adult"]["n_missed"],
        "n_spurious": rows["child"]["n_spurious"] + rows["adult"]["n_spurious"],
    }
    for name, bucket in (("child", rows["child"]), ("adult", rows["adult"]), ("entire", merged)):
        summary = CohortSummary(
            n_slaps=bucket["n_slaps"],
            n_gt_fingerprints=bucket["n_gt"],
            n_matched=bucket["n_matched"],
            n_missed=bucket["n_missed"],
            n_spurious=bucket["n_spurious"],
        )
        if bucket["errors"]:
            summary.mae = mae(bucket["errors"])
            summary.eap = eap(bucket["pairs"])
        if bucket["gt_sets"]:
            summary.label_accuracy = label_accuracy(
                bucket["gt_sets"], bucket["pred_sets"], num_labels
            )
        if bucket["n_gt"] > 0:
            summary.tolerance_pass_rate = sum(bucket["passes"]) / bucket["n_gt"]
        report.cohorts[name] = summary
    return report, signed, angle_errors


def histogram_rows(
    signed_errors: dict[str, list[float]],
    angle_errors: list[float],
    bin_width: float = 1.0,
) -> list[tuple[str, float, float, int]]:
    """Fixed-width histogram bins of signed side errors and angle errors.

    Rows are (metric, bin_left, bin_right, count); bins are anchored at
    integer multiples of ``bin_width`` so outputs are reproducible.
    """
    rows = []
    series = [(f"mae_{side}", values) for side, values in signed_errors.items()]
    series.append(("eap", angle_errors))
    for name, values in series:
        if not values:
            continue
        lo = math.floor(min(values) / bin_width)
        hi = math.floor(max(values) / bin_width) + 1
        counts = [0] * (hi - lo)
        for v in values:
            counts[min(int(math.floor(v / bin_width)) - lo, hi - lo - 1)] += 1
        for k, count in enumerate(counts):
            rows.append((name, (lo + k) * bin_width, (lo + k + 1) * bin_width, count))
    return rows
