import json
import subprocess
import sys

import pytest

from orientseg.cli import main
from orientseg.dataset_io import load_annotations, load_dataset, save_predictions, PredictedSlap, ScoredBox
from orientseg.geometry import RotatedBox
from orientseg.metrics import MatchTrial, save_scores

SPEC = {
    "n_subjects": 2,
    "hands": ["right"],
    "image_size": [900, 560],
    "center_jitter": 12.0,
    "angle_jitter": 8.0,
    "finger_size_ranges": {
        "child": [[80, 110], [110, 150]],
        "adult": [[130, 170], [170, 220]],
    },
    "rng_seed": 11,
}


def write_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(SPEC))
    return str(path)


def run_synth(tmp_path, out="data", session=None):
    args = ["synth", "--spec", write_spec(tmp_path), "--out", str(tmp_path / out)]
    if session:
        args += ["--session", session]
    assert main(args) == 0
    return tmp_path / out


class TestSynthAndValidate:
    def test_synth_writes_dataset(self, tmp_path):
        out = run_synth(tmp_path)
        slaps = load_annotations(out / "annotations.jsonl")
        assert len(slaps) == 2
        for slap in slaps:
            assert (out / slap.image_path).exists()

    def test_synth_deterministic(self, tmp_path):
        a = run_synth(tmp_path, "a")
        b = run_synth(tmp_path, "b")
        assert (a / "annotations.jsonl").read_bytes() == (b / "annotations.jsonl").read_bytes()
        for slap in load_annotations(a / "annotations.jsonl"):
            assert (a / slap.image_path).read_bytes() == (b / slap.image_path).read_bytes()

    def test_validate_good_file(self, tmp_path):
        out = run_synth(tmp_path)
        assert main(["validate", str(out / "annotations.jsonl")]) == 0

    def test_validate_bad_file(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"schema_version":1,"slap_id":"x"}\n')
        assert main(["validate", str(bad)]) == 1

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as err:
            main(["synth", "--no-such-flag"])
        assert err.value.code == 2


class TestAugment:
    def test_augment_pipeline(self, tmp_path):
        data = run_synth(tmp_path)
        out = tmp_path / "aug"
        assert main([
            "augment", "--in", str(data), "--out", str(out),
            "--seed", "3", "--per-slap", "2", "--min", "-90", "--max", "90",
        ]) == 0
        items = load_dataset(out)
        assert len(items) == 4
        for slap, image in items:
            assert slap.provenance["kind"] == "augmented"
            assert -90 <= slap.provenance["alpha"] <= 90
            assert image.ndim == 2


class TestAnchorsAndAssign:
    def test_default_anchor_set(self, tmp_path):
        out = tmp_path / "anchors.jsonl"
        assert main(["anchors", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 63
        first = json.loads(lines[0])
        assert set(first) == {"index", "xc", "yc", "w", "h", "theta_deg"}

    def test_assign_against_gt(self, tmp_path):
        data = run_synth(tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "orientations": [0.0], "scales": [150.0], "aspect_ratios": [1.0],
            "stride": 150.0, "grid_w": 6, "grid_h": 4,
        }))
        anchors_file = tmp_path / "anchors.jsonl"
        assert main(["anchors", "--config", str(cfg), "--out", str(anchors_file)]) == 0
        out = tmp_path / "assign.jsonl"
        assert main([
            "assign", "--anchors", str(anchors_file),
            "--gt", str(data / "annotations.jsonl"), "--out", str(out),
        ]) == 0
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 2 * 24
        assert {r["category"] for r in rows} <= {"positive", "negative", "neutral"}
        for slap_id in {r["slap_id"] for r in rows}:
            assert any(
                r["category"] == "positive" for r in rows if r["slap_id"] == slap_id
            )


class TestNmsAndCrop:
    def test_nms_file_roundtrip(self, tmp_path):
        box = RotatedBox(50, 50, 30, 40, 10)
        preds = [PredictedSlap(
            slap_id="s1",
            detections=(
                ScoredBox(box, "Right-Index", 0.9),
                ScoredBox(box, "Right-Index", 0.8),
                ScoredBox(RotatedBox(150, 50, 30, 40, 0), "Right-Middle", 0.95),
                ScoredBox(RotatedBox(250, 50, 30, 40, 0), "Right-Ring", 0.5),
            ),
        )]
        infile = tmp_path / "in.jsonl"
        outfile = tmp_path / "out.jsonl"
        save_predictions(infile, preds)
        assert main(["nms", "--in", str(infile), "--out", str(outfile)]) == 0
        from orientseg.dataset_io import load_predictions

        kept = load_predictions(outfile)[0]
        assert [d.label for d in kept.detections] == ["Right-Middle", "Right-Index"]

    def test_crop_writes_named_pngs(self, tmp_path):
        data = run_synth(tmp_path)
        slaps = load_annotations(data / "annotations.jsonl")
        one = tmp_path / "one.jsonl"
        from orientseg.dataset_io import save_annotations

        save_annotations(one, [slaps[0]])
        outdir = tmp_path / "crops"
        assert main([
            "crop", "--image", str(data / slaps[0].image_path),
            "--boxes", str(one), "--outdir", str(outdir),
        ]) == 0
        for lb in slaps[0].boxes:
            assert (outdir / f"{slaps[0].slap_id}_{lb.label}.png").exists()


class TestEval:
    def test_eval_seg_self_comparison_zero(self, tmp_path):
        data = run_synth(tmp_path)
        report_path = tmp_path / "report.json"
        assert main([
            "eval-seg", "--gt", str(data / "annotations.jsonl"),
            "--pred", str(data / "annotations.jsonl"), "--report", str(report_path),
        ]) == 0
        report = json.loads(report_path.read_text())
        entire = report["cohorts"]["entire"]
        for side in ("left", "right", "top", "bottom"):
            assert entire["mae"][side]["mean"] == 0.0
        assert entire["eap"]["mean"] == 0.0
        assert entire["label_accuracy"] == 1.0
        assert entire["tolerance_pass_rate"] == 1.0

    def test_eval_seg_hist_csv(self, tmp_path):
        data = run_synth(tmp_path)
        csv_path = tmp_path / "hist.csv"
        assert main([
            "eval-seg", "--gt", str(data / "annotations.jsonl"),
            "--pred", str(data / "annotations.jsonl"),
            "--report", str(tmp_path / "r.json"), "--hist-csv", str(csv_path),
        ]) == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "metric,bin_left,bin_right,count"
        assert len(lines) > 1

    def test_eval_labels(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        assert main([
            "eval-labels", "--gt", str(data / "annotations.jsonl"),
            "--pred", str(data / "annotations.jsonl"),
        ]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["label_accuracy"]["entire"] == 1.0

    def test_eval_match(self, tmp_path, capsys):
        scores = tmp_path / "scores.jsonl"
        trials = [MatchTrial(f"p{i}", f"g{i}", True, 0.9) for i in range(97)]
        trials += [MatchTrial(f"p{i}", f"g{i}", True, 0.1) for i in range(97, 100)]
        trials += [MatchTrial(f"p{i}", f"x{i}", False, 0.2) for i in range(100)]
        save_scores(scores, trials)
        assert main(["eval-match", "--scores", str(scores), "--far", "0.0"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["tar_at_far"] == pytest.approx(0.97)
        assert out["n_genuine"] == 100
        assert out["n_impostor"] == 100


class TestGradcheckAndEntryPoint:
    def test_gradcheck_passes(self, capsys):
        assert main(["gradcheck", "--points", "25", "--seed", "7"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert max(out["max_relative_error"].values()) <= 1e-5

    def test_console_script_runs(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "orientseg.cli", "anchors", "--out", str(tmp_path / "a.jsonl")],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert "63 anchors" in result.stderr
