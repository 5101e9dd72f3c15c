import math

import numpy as np
import pytest

from orientseg.geometry import contains, rotation_matrix
from orientseg.metrics import build_trials, roc, tar_at_far
from orientseg.postprocess import extract_crop
from orientseg.synth import (
    SynthSpec,
    correlation_scorer,
    finger_records,
    generate,
    pristine_patch,
    synth_scorer,
)

SMALL = dict(image_size=(900, 560), center_jitter=12.0, angle_jitter=8.0)
SMALL_SIZES = {
    "child": ((80.0, 110.0), (110.0, 150.0)),
    "adult": ((130.0, 170.0), (170.0, 220.0)),
}


def small_spec(**overrides) -> SynthSpec:
    kwargs = dict(
        n_subjects=2,
        hands=("right",),
        finger_size_ranges=SMALL_SIZES,
        rng_seed=11,
        **SMALL,
    )
    kwargs.update(overrides)
    return SynthSpec(**kwargs)


class TestGenerate:
    def test_right_hand_layout(self):
        dataset = generate(small_spec(n_subjects=1))
        assert len(dataset.slaps) == 1
        slap = dataset.slaps[0]
        assert slap.hand == "right"
        labels = [b.label for b in slap.boxes]
        assert labels == ["Right-Index", "Right-Middle", "Right-Ring", "Right-Little"]
        xs = [b.box.x_c for b in slap.boxes]
        assert xs == sorted(xs)

    def test_left_hand_layout_mirrors(self):
        dataset = generate(small_spec(n_subjects=1, hands=("left",)))
        labels = [b.label for b in dataset.slaps[0].boxes]
        assert labels == ["Left-Little", "Left-Ring", "Left-Middle", "Left-Index"]

    def test_thumbs_layout(self):
        dataset = generate(small_spec(n_subjects=1, hands=("thumbs",)))
        labels = [b.label for b in dataset.slaps[0].boxes]
        assert labels == ["Left-Thumb", "Right-Thumb"]

    def test_same_seed_byte_identical(self):
        d1 = generate(small_spec())
        d2 = generate(small_spec())
        assert [s.slap_id for s in d1.slaps] == [s.slap_id for s in d2.slaps]
        for slap_id in d1.images:
            assert np.array_equal(d1.images[slap_id], d2.images[slap_id])

    def test_different_session_same_texture_different_placement(self):
        da = generate(small_spec(session="a"))
        db = generate(small_spec(session="b"))
        moved = any(
            ba.box != bb.box
            for sa, sb in zip(da.slaps, db.slaps)
            for ba, bb in zip(sa.boxes, sb.boxes)
        )
        assert moved

    def test_hand_metadata_valid(self):
        dataset = generate(small_spec(hands=("left", "right", "thumbs")))
        from orientseg.dataset_io import validate_slap

        for slap in dataset.slaps:
            assert validate_slap(slap) == []

    def test_age_separation(self):
        dataset = generate(small_spec(n_subjects=10, age_mix=0.5))
        child_areas = [
            b.box.area for s in dataset.slaps if s.age_group == "child" for b in s.boxes
        ]
        adult_areas = [
            b.box.area for s in dataset.slaps if s.age_group == "adult" for b in s.boxes
        ]
        assert child_areas and adult_areas
        assert np.mean(child_areas) < np.mean(adult_areas)

    def test_ground_truth_bounds_rendered_patch(self):
        dataset = generate(small_spec(n_subjects=1))
        slap = dataset.slaps[0]
        image = dataset.images[slap.slap_id]
        ys, xs = np.nonzero(image < 250)
        px = xs + 0.5
        py = ys + 0.5
        for lb in slap.boxes:
            box = lb.box
            m00, m01, m10, m11 = rotation_matrix(-box.theta)
            dx, dy = px - box.x_c, py - box.y_c
            u = m00 * dx + m01 * dy
            v = m10 * dx + m11 * dy
            mine = (np.abs(u) <= box.w / 2 + 0.71) & (np.abs(v) <= box.h / 2 + 0.71)
            others = np.zeros_like(mine)
            for other in slap.boxes:
                ob = other.box
                om = rotation_matrix(-ob.theta)
                ou = om[0] * (px - ob.x_c) + om[1] * (py - ob.y_c)
                ov = om[2] * (px - ob.x_c) + om[3] * (py - ob.y_c)
                others |= (np.abs(ou) <= ob.w / 2 + 0.71) & (np.abs(ov) <= ob.h / 2 + 0.71)
            # every dark pixel belongs to some box (support within the union)
            assert others.all()
            # and this box's patch reaches within ~1.5 px of its sides
            inside = np.abs(u[mine & ~np.isnan(u)])
            assert inside.max() >= box.w / 2 - 1.5 or np.abs(v[mine]).max() >= box.h / 2 - 1.5

    def test_overlap_failure_raises(self):
        spec = small_spec(
            image_size=(260, 200),
            finger_size_ranges={
                "child": ((80.0, 110.0), (110.0, 150.0)),
                "adult": ((130.0, 170.0), (170.0, 220.0)),
            },
            n_subjects=1,
            age_mix=0.0,
        )
        with pytest.raises(RuntimeError):
            generate(spec)


class TestScorer:
    def test_self_correlation_is_one(self):
        dataset = generate(small_spec(n_subjects=1))
        slap = dataset.slaps[0]
        crop = extract_crop(dataset.images[slap.slap_id], slap.boxes[0].box)
        assert synth_scorer(crop, crop) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_phase_anticorrelates(self):
        patch = pristine_patch(100, 140, phi=0.7, phase=0.2, period=12.0)
        flipped = pristine_patch(100, 140, phi=0.7, phase=0.2 + math.pi, period=12.0)
        assert synth_scorer(patch, flipped) <= 0.0

    def test_genuine_vs_impostor_separation(self):
        probe_set = generate(small_spec(n_subjects=6, session="a"))
        gallery_set = generate(small_spec(n_subjects=6, session="b"))
        out = build_trials(
            finger_records(probe_set),
            finger_records(gallery_set),
            correlation_scorer,
            impostors_per_probe=5,
        )
        genuine = [t.score for t in out.trials if t.genuine]
        impostor = [t.score for t in out.trials if not t.genuine]
        assert min(genuine) > 0.7
        assert max(impostor) < 0.5
        curve = roc(out.trials)
        assert tar_at_far(curve, 0.01) == 1.0


class TestCropFidelity:
    def test_crop_recovers_pristine_patch(self):
        dataset = generate(small_spec(n_subjects=2))
        checked = 0
        for slap in dataset.slaps:
            image = dataset.images[slap.slap_id]
            for lb in slap.boxes:
                crop = extract_crop(image, lb.box)
                patch = dataset.patches[(slap.slap_id, lb.label)]
                assert crop.shape == patch.shape
                diff = np.abs(crop.astype(np.float64) - patch.astype(np.float64))
                assert diff.mean() <= 3.0
                checked += 1
        assert checked == 8
