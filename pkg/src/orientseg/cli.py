"""Command-line entry point.

Subcommands are thin wrappers over the library: they parse arguments,
move bytes between files, and exit.  Diagnostics go to stderr, data to
files or stdout.  Exit codes: 0 success, 1 validation/data error, 2 usage
error (argparse's default).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import anchors as anchors_mod
from . import augmentation, dataset_io, losses, metrics, postprocess, synth
from .geometry import RotatedBox


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _write_json(path: str | None, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        dataset_io.atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def cmd_synth(args: argparse.Namespace) -> int:
    kwargs = {}
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            kwargs.update(json.load(fh))
    if args.subjects is not None:
        kwargs["n_subjects"] = args.subjects
    if args.seed is not None:
        kwargs["rng_seed"] = args.seed
    if args.session is not None:
        kwargs["session"] = args.session
    if args.hands is not None:
        kwargs["hands"] = tuple(args.hands.split(","))
    if "hands" in kwargs:
        kwargs["hands"] = tuple(kwargs["hands"])
    if "image_size" in kwargs:
        kwargs["image_size"] = tuple(kwargs["image_size"])
    if "finger_size_ranges" in kwargs:
        kwargs["finger_size_ranges"] = {
            group: tuple(tuple(r) for r in ranges)
            for group, ranges in kwargs["finger_size_ranges"].items()
        }
    spec = synth.SynthSpec(**kwargs)
    dataset = synth.generate(spec)
    dataset_io.save_dataset(args.out, [(s, dataset.images[s.slap_id]) for s in dataset.slaps])
    print(f"wrote {len(dataset.slaps)} slaps to {args.out}", file=sys.stderr)
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    spec = augmentation.AugmentationSpec(
        angle_min=args.min,
        angle_max=args.max,
        samples_per_slap=args.per_slap,
        rng_seed=args.seed,
        canvas_policy=args.policy,
    )
    dataset = dataset_io.load_dataset(args.in_dir)
    augmented = augmentation.augment_dataset(dataset, spec)
    dataset_io.save_dataset(args.out, augmented)
    print(f"wrote {len(augmented)} augmented slaps to {args.out}", file=sys.stderr)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    slaps = dataset_io.load_annotations(args.file)
    print(f"{len(slaps)} records ok", file=sys.stderr)
    return 0


def cmd_anchors(args: argparse.Namespace) -> int:
    kwargs = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            kwargs.update(json.load(fh))
    for key in ("orientations", "scales", "aspect_ratios"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    cfg = anchors_mod.AnchorConfig(**kwargs)
    boxes = anchors_mod.generate_anchors(cfg)
    lines = [
        dataset_io.dumps_record(
            {"index": i, "xc": b.x_c, "yc": b.y_c, "w": b.w, "h": b.h, "theta_deg": b.theta}
        )
        for i, b in enumerate(boxes)
    ]
    dataset_io.atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    print(f"wrote {len(boxes)} anchors to {args.out}", file=sys.stderr)
    return 0


def _read_anchor_file(path: str) -> list[RotatedBox]:
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            boxes.append(
                RotatedBox(obj["xc"], obj["yc"], obj["w"], obj["h"], obj["theta_deg"])
            )
    return boxes


def cmd_assign(args: argparse.Namespace) -> int:
    anchor_boxes = _read_anchor_file(args.anchors)
    slaps = dataset_io.load_annotations(args.gt)
    lines = []
    for slap in slaps:
        gt_boxes = [b.box for b in slap.boxes]
        for a in anchors_mod.assign_anchors(anchor_boxes, gt_boxes, args.pos, args.neg):
            lines.append(
                dataset_io.dumps_record(
                    {
                        "slap_id": slap.slap_id,
                        "anchor_index": a.anchor_index,
                        "category": a.category,
                        "matched_gt": a.matched_gt,
                        "iou": a.iou,
                    }
                )
            )
    dataset_io.atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    print(f"wrote {len(lines)} assignments to {args.out}", file=sys.stderr)
    return 0


def cmd_nms(args: argparse.Namespace) -> int:
    cfg = postprocess.NmsConfig(
        score_threshold=args.score_threshold,
        iou_threshold=args.iou_threshold,
        max_keep=args.max_keep,
    )
    preds = dataset_io.load_predictions(args.in_file)
    kept = [
        dataset_io.PredictedSlap(
            slap_id=p.slap_id,
            detections=tuple(postprocess.rotated_nms(list(p.detections), cfg)),
            extras=p.extras,
        )
        for p in preds
    ]
    dataset_io.save_predictions(args.out, kept)
    n_in = sum(len(p.detections) for p in preds)
    n_out = sum(len(p.detections) for p in kept)
    print(f"kept {n_out}/{n_in} detections", file=sys.stderr)
    return 0


def cmd_crop(args: argparse.Namespace) -> int:
    from .imaging import load_png, save_png

    image = load_png(args.image)
    try:
        records = dataset_io.load_predictions(args.boxes)
        boxes = [(d.box, d.label) for r in records for d in r.detections]
        slap_ids = [r.slap_id for r in records]
    except dataset_io.DatasetError:
        slaps = dataset_io.load_annotations(args.boxes)
        boxes = [(b.box, b.label) for s in slaps for b in s.boxes]
        slap_ids = [s.slap_id for s in slaps]
    if len(slap_ids) != 1:
        return _fail(f"{args.boxes} must contain exactly one record, found {len(slap_ids)}")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for box, label in boxes:
        crop = postprocess.extract_crop(image, box)
        save_png(outdir / f"{slap_ids[0]}_{label}.png", crop)
    print(f"wrote {len(boxes)} crops to {outdir}", file=sys.stderr)
    return 0


def _load_pred_file(path: str) -> list[dataset_io.PredictedSlap]:
    """Predictions, or an annotation file promoted to score-1.0 predictions."""
    try:
        return dataset_io.load_predictions(path)
    except dataset_io.DatasetError:
        slaps = dataset_io.load_annotations(path)
        return [
            dataset_io.PredictedSlap(
                slap_id=s.slap_id,
                detections=tuple(
                    dataset_io.ScoredBox(b.box, b.label, 1.0) for b in s.boxes
                ),
            )
            for s in slaps
        ]


def cmd_eval_seg(args: argparse.Namespace) -> int:
    gt = dataset_io.load_annotations(args.gt)
    pred = _load_pred_file(args.pred)
    report, signed, angle_errors = metrics.evaluate_segmentation(
        gt, pred, iou_floor=args.iou_floor
    )
    _write_json(args.report, report.to_obj())
    if args.hist_csv:
        rows = metrics.histogram_rows(signed, angle_errors)
        text = "metric,bin_left,bin_right,count\n" + "".join(
            f"{m},{lo},{hi},{n}\n" for m, lo, hi, n in rows
        )
        dataset_io.atomic_write_text(args.hist_csv, text)
    return 0


def cmd_eval_labels(args: argparse.Namespace) -> int:
    gt = dataset_io.load_annotations(args.gt)
    pred = _load_pred_file(args.pred)
    preds_by_id = {p.slap_id: p for p in pred}
    buckets: dict[str, tuple[list, list]] = {"child": ([], []), "adult": ([], [])}
    for slap in gt:
        gt_sets, pred_sets = buckets[slap.age_group]
        gt_sets.append(dataset_io.label_set(slap))
        p = preds_by_id.get(slap.slap_id)
        pred_sets.append(dataset_io.label_set(p) if p else frozenset())
    out = {}
    for name in ("child", "adult"):
        gt_sets, pred_sets = buckets[name]
        out[name] = metrics.label_accuracy(gt_sets, pred_sets, args.num_labels) if gt_sets else None
    all_gt = buckets["child"][0] + buckets["adult"][0]
    all_pred = buckets["child"][1] + buckets["adult"][1]
    out["entire"] = metrics.label_accuracy(all_gt, all_pred, args.num_labels) if all_gt else None
    _write_json(args.report, {"label_accuracy": out})
    return 0


def cmd_eval_match(args: argparse.Namespace) -> int:
    trials = metrics.load_scores(args.scores)
    curve = metrics.roc(trials)
    tar = metrics.tar_at_far(curve, args.far)
    stride = max(1, len(curve.thresholds) // args.max_roc_points)
    points = [
        [float(curve.far[i]), float(curve.tar[i])]
        for i in range(0, len(curve.thresholds), stride)
    ]
    _write_json(
        args.report,
        {
            "far_target": args.far,
            "tar_at_far": tar,
            "n_genuine": curve.n_genuine,
            "n_impostor": curve.n_impostor,
            "n_failed_genuine": curve.n_failed_genuine,
            "n_failed_impostor": curve.n_failed_impostor,
            "roc": points,
        },
    )
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    import random

    rng = random.Random(args.seed)
    worst = {"smooth_l1": 0.0, "cls_loss": 0.0, "reg_loss": 0.0}
    for _ in range(args.points):
        x = rng.uniform(-3.0, 3.0)
        while abs(abs(x) - 1.0) < 1e-3:
            x = rng.uniform(-3.0, 3.0)
        worst["smooth_l1"] = max(
            worst["smooth_l1"],
            losses.grad_check(
                lambda v: losses.smooth_l1(v[0]), lambda v: [losses.smooth_l1_grad(v[0])], [x]
            ),
        )
        p = rng.uniform(0.05, 0.95)
        u = rng.choice([0, 1])
        worst["cls_loss"] = max(
            worst["cls_loss"],
            losses.grad_check(
                lambda v: losses.cls_loss(v[0], u), lambda v: [losses.cls_loss_grad(v[0], u)], [p]
            ),
        )
        t_star = losses.RegressionOffsets(*(rng.uniform(-2.0, 2.0) for _ in range(5)))
        t = [rng.uniform(-2.0, 2.0) for _ in range(5)]
        for i in range(5):
            while abs(abs(t_star.as_tuple()[i] - t[i]) - 1.0) < 1e-3:
                t[i] = rng.uniform(-2.0, 2.0)
        worst["reg_loss"] = max(
            worst["reg_loss"],
            losses.grad_check(
                lambda v: losses.reg_loss(losses.RegressionOffsets(*v), t_star, 1),
                lambda v: losses.reg_loss_grad(losses.RegressionOffsets(*v), t_star, 1),
                t,
            ),
        )
    _write_json(None, {"max_relative_error": worst, "tolerance": args.tolerance})
    if max(worst.values()) > args.tolerance:
        return _fail("gradient check exceeded tolerance")
    return 0


def cmd_review_serve(args: argparse.Namespace) -> int:
    from .service import serve

    serve(args.data, host=args.host, port=args.port, ui_dir=args.ui)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orientseg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic slap dataset")
    p.add_argument("--spec", help="SynthSpec JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--session")
    p.add_argument("--hands", help="comma-separated subset of left,right,thumbs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="rotate slaps and their ground truth")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-slap", type=int, default=1)
    p.add_argument("--min", type=float, default=-90.0)
    p.add_argument("--max", type=float, default=90.0)
    p.add_argument("--policy", choices=augmentation.CANVAS_POLICIES, default="expand")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="validate an annotation file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("anchors", help="emit the anchor set of a config")
    p.add_argument("--config", help="AnchorConfig JSON file (defaults when omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("assign", help="assign anchors against ground truth")
    p.add_argument("--anchors", required=True, help="anchor JSONL from `orientseg anchors`")
    p.add_argument("--gt", required=True, help="annotation JSONL")
    p.add_argument("--pos", type=float, default=0.7)
    p.add_argument("--neg", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("nms", help="filter detections by score and rotated NMS")
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--score-threshold", type=float, default=0.7)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--max-keep", type=int, default=1000)
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("crop", help="extract rectified fingerprint crops")
    p.add_argument("--image", required=True)
    p.add_argument("--boxes", required=True, help="single-record annotation/prediction JSONL")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("eval-seg", help="segmentation metrics: MAE, EAP, tolerance")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", help="report JSON path (stdout when omitted)")
    p.add_argument("--hist-csv", help="optional per-side error histogram CSV")
    p.add_argument("--iou-floor", type=float, default=0.1)
    p.set_defaults(func=cmd_eval_seg)

    p = sub.add_parser("eval-labels", help="finger-label accuracy (1 - Hamming loss)")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", help="report JSON path (stdout when omitted)")
    p.add_argument("--num-labels", type=int, default=10)
    p.set_defaults(func=cmd_eval_labels)

    p = sub.add_parser("eval-match", help="verification ROC and TAR at a FAR target")
    p.add_argument("--scores", required=True, help="score JSONL")
    p.add_argument("--far", type=float, default=0.001)
    p.add_argument("--report", help="report JSON path (stdout when omitted)")
    p.add_argument("--max-roc-points", type=int, default=1024)
    p.set_defaults(func=cmd_eval_match)

    p = sub.add_parser("gradcheck", help="verify loss gradients against finite differences")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("review-serve", help="serve the annotation review API")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui", help="static frontend directory to mount at /")
    p.set_defaults(func=cmd_review_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (dataset_io.DatasetError, ValueError, OSError, RuntimeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
