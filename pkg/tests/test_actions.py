import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navaug.actions import (
    Action,
    ActionPrediction,
    Candidate,
    RotationConfig,
    ValidRegion,
    predict_action,
    predict_sequence,
    rotate_frame,
    windowed_mse,
)
from navaug.errors import DegenerateGeometryError
from navaug.frames import Frame

from helpers import pan_pair, pan_sequence, random_panorama

# Geometry with no leftover columns: shift and window both span exactly
# one ninth of the frame, so window placement is mirror-symmetric.
SYMMETRIC_CFG = RotationConfig(window_deg=40.0, shift_deg=40.0)


def mse_windows_oracle(ref, cand, start, width, count):
    """Brute-force double-loop MSE, independent of the production kernel."""
    h, _, c = ref.shape
    out = []
    for k in range(count):
        a = start + k * width
        acc = 0.0
        n = 0
        for i in range(h):
            for j in range(a, a + width):
                for ch in range(c):
                    d = float(ref[i, j, ch]) - float(cand[i, j, ch])
                    acc += d * d
                    n += 1
        out.append(acc / n)
    return out


class TestRotateFrame:
    def test_zero_shift_is_identity(self):
        frame = random_panorama(np.random.default_rng(0), 32, 4)
        out, valid = rotate_frame(frame, Action.LEFT, 0)
        assert np.array_equal(out.pixels, frame.pixels)
        assert valid == ValidRegion(0, 32)

    def test_right_shift_moves_columns_right(self):
        frame = Frame.from_array(np.arange(8, dtype=float)[np.newaxis, :] / 10.0)
        out, valid = rotate_frame(frame, Action.RIGHT, 2)
        assert valid == ValidRegion(2, 8)
        expected = np.array([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
        assert np.allclose(out.pixels[0, 2:, 0], expected)

    def test_left_shift_moves_columns_left(self):
        frame = Frame.from_array(np.arange(8, dtype=float)[np.newaxis, :] / 10.0)
        out, valid = rotate_frame(frame, Action.LEFT, 2)
        assert valid == ValidRegion(0, 6)
        expected = np.array([0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
        assert np.allclose(out.pixels[0, :6, 0], expected)

    def test_full_width_shift_rejected(self):
        frame = random_panorama(np.random.default_rng(1), 8, 2)
        with pytest.raises(ValueError):
            rotate_frame(frame, Action.LEFT, 8)
        with pytest.raises(ValueError):
            rotate_frame(frame, Action.RIGHT, -1)

    def test_non_turn_direction_rejected(self):
        frame = random_panorama(np.random.default_rng(2), 8, 2)
        with pytest.raises(ValueError):
            rotate_frame(frame, Action.FORWARD, 1)


class TestWindowedMse:
    def test_identical_frames_score_zero(self):
        frame = random_panorama(np.random.default_rng(3), 36, 5)
        ws = windowed_mse(frame, frame, ValidRegion(0, 36), RotationConfig())
        assert len(ws.scores) == 36 // RotationConfig().window_px(36)
        assert all(s == 0.0 for s in ws.scores)

    def test_constant_frames_score_analytically(self):
        a = Frame.from_array(np.full((4, 18), 0.2))
        b = Frame.from_array(np.full((4, 18), 0.7))
        ws = windowed_mse(a, b, ValidRegion(0, 18), RotationConfig())
        assert all(abs(s - 0.25) < 1e-15 for s in ws.scores)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(4)
        cfg = RotationConfig()
        for _ in range(25):
            ref = Frame.from_array(rng.random((8, 32, 3)))
            cand = Frame.from_array(rng.random((8, 32, 3)))
            start = int(rng.integers(0, 6))
            valid = ValidRegion(start, 32)
            ws = windowed_mse(ref, cand, valid, cfg)
            d = cfg.window_px(32)
            expected = mse_windows_oracle(ref.pixels, cand.pixels, start, d, valid.width // d)
            assert len(ws.scores) == len(expected)
            for got, want in zip(ws.scores, expected):
                assert abs(got - want) <= 1e-12

    def test_dimension_mismatch_rejected(self):
        a = random_panorama(np.random.default_rng(5), 32, 4)
        b = random_panorama(np.random.default_rng(5), 36, 4)
        with pytest.raises(ValueError):
            windowed_mse(a, b, ValidRegion(0, 32), RotationConfig())

    def test_no_window_fits_is_degenerate(self):
        frame = random_panorama(np.random.default_rng(6), 36, 4)
        with pytest.raises(DegenerateGeometryError):
            windowed_mse(frame, frame, ValidRegion(0, 4), RotationConfig())

    @given(
        width=st.integers(min_value=18, max_value=90),
        start=st.integers(min_value=0, max_value=10),
        window_deg=st.integers(min_value=30, max_value=170),
    )
    @settings(max_examples=60, deadline=None)
    def test_score_count_is_floor_of_valid_width(self, width, start, window_deg):
        cfg = RotationConfig(window_deg=float(window_deg))
        d = cfg.window_px(width)
        if d < 1 or start >= width or (width - start) // d < 1:
            return
        frame = Frame.from_array(np.zeros((2, width)))
        ws = windowed_mse(frame, frame, ValidRegion(start, width), cfg)
        assert len(ws.scores) == (width - start) // d


class TestPredictAction:
    def test_static_scene_is_forward(self):
        rng = np.random.default_rng(7)
        frame = random_panorama(rng, 144, 6, texture="stripes")
        pred = predict_action(frame, frame)
        assert pred.label is Action.FORWARD
        assert pred.decision_scores[Candidate.UNCHANGED] == 0.0

    @pytest.mark.parametrize("texture", ["stripes", "noise"])
    @pytest.mark.parametrize("truth", [Action.LEFT, Action.RIGHT])
    def test_exact_pan_recovers_turn(self, texture, truth):
        # pan == shift_px: the matching hypothesis realigns perfectly, so
        # its window scores the noise floor and the turn must win.
        cfg = RotationConfig()
        rng = np.random.default_rng(sum(map(ord, texture + truth.value)))
        for _ in range(10):
            width = 144
            shift = cfg.shift_px(width)
            frame = random_panorama(rng, width, 6, texture=texture, shift_px=shift)
            a, b = pan_pair(frame, truth, shift)
            assert predict_action(a, b, cfg).label is truth

    def test_prediction_is_pure(self):
        rng = np.random.default_rng(8)
        frame = random_panorama(rng, 144, 4)
        a, b = pan_pair(frame, Action.LEFT, 30)
        first = predict_action(a, b)
        second = predict_action(a, b)
        assert first == second
        assert first.decision_scores == second.decision_scores

    def test_mirror_symmetry_swaps_left_and_right(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            width = 108  # multiple of 9 so the symmetric config has no remainder
            shift = SYMMETRIC_CFG.shift_px(width)
            frame = random_panorama(rng, width, 5, texture="stripes", shift_px=shift)
            truth = Action.LEFT if rng.random() < 0.5 else Action.RIGHT
            a, b = pan_pair(frame, truth, int(rng.integers(shift, shift * 3 // 2 + 1)))
            plain = predict_action(a, b, SYMMETRIC_CFG).label
            mirrored = predict_action(a.mirrored(), b.mirrored(), SYMMETRIC_CFG).label
            flip = {Action.LEFT: Action.RIGHT, Action.RIGHT: Action.LEFT, Action.FORWARD: Action.FORWARD}
            assert mirrored is flip[plain]

    @given(offset=st.floats(min_value=-0.05, max_value=0.05))
    @settings(max_examples=20, deadline=None)
    def test_constant_intensity_offset_is_ignored(self, offset):
        rng = np.random.default_rng(10)
        frame = random_panorama(rng, 144, 4, texture="stripes")
        base = np.clip(frame.pixels, 0.1, 0.9)  # leave headroom for the offset
        a, b = pan_pair(Frame.from_array(base), Action.RIGHT, 28)
        shifted_a = Frame.from_array(a.pixels + offset)
        shifted_b = Frame.from_array(b.pixels + offset)
        assert predict_action(shifted_a, shifted_b).label is predict_action(a, b).label

    def test_few_windows_emit_warning(self, caplog):
        # 18px frame: shift 3px, window 4px -> 3 valid windows unchanged, 3 rotated
        cfg = RotationConfig(window_deg=120.0, shift_deg=60.0)
        frame = random_panorama(np.random.default_rng(11), 18, 2)
        with caplog.at_level(logging.WARNING, logger="navaug.actions"):
            predict_action(frame, frame, cfg)
        assert any("window" in rec.message for rec in caplog.records)

    def test_mismatched_dimensions_rejected(self):
        a = random_panorama(np.random.default_rng(12), 144, 4)
        b = random_panorama(np.random.default_rng(12), 90, 4)
        with pytest.raises(ValueError):
            predict_action(a, b)

    def test_diagnostic_records_schema(self):
        rng = np.random.default_rng(13)
        frame = random_panorama(rng, 144, 4)
        a, b = pan_pair(frame, Action.LEFT, 24)
        records = predict_action(a, b).diagnostic_records(frame_index=7)
        assert len(records) == 3
        assert {r["candidate"] for r in records} == {"left_rotated", "unchanged", "right_rotated"}
        for r in records:
            assert r["frame_index"] == 7
            assert r["label"] == "left"
            assert all(s >= 0.0 for s in r["window_scores"])


class TestPredictSequence:
    def test_two_identical_frames(self):
        frame = random_panorama(np.random.default_rng(14), 144, 4)
        preds = predict_sequence([frame, frame])
        assert [p.label for p in preds] == [Action.FORWARD]

    def test_pan_sequence_labels(self):
        rng = np.random.default_rng(15)
        cfg = RotationConfig()
        shift = cfg.shift_px(144)
        base = random_panorama(rng, 144, 6, texture="stripes", shift_px=shift)
        truth = [Action.FORWARD, Action.LEFT, Action.FORWARD]
        frames = pan_sequence(base, truth, shift)
        preds = predict_sequence(frames, cfg)
        assert [p.label for p in preds] == truth

    def test_single_frame_rejected(self):
        frame = random_panorama(np.random.default_rng(16), 144, 4)
        with pytest.raises(ValueError):
            predict_sequence([frame])

    def test_mixed_dimensions_rejected(self):
        a = random_panorama(np.random.default_rng(17), 144, 4)
        b = random_panorama(np.random.default_rng(17), 90, 4)
        with pytest.raises(ValueError):
            predict_sequence([a, b])


class TestRotationConfig:
    def test_default_geometry(self):
        cfg = RotationConfig()
        assert cfg.shift_px(144) == 24
        assert cfg.window_px(144) == 32
        r, d = cfg.derived_px(144)
        assert (144 - r) // d == 3  # three windows beside the shift band

    def test_invalid_angles_rejected(self):
        with pytest.raises(ValueError):
            RotationConfig(shift_deg=0.0)
        with pytest.raises(ValueError):
            RotationConfig(window_deg=400.0)

    def test_window_must_fit_beside_band(self):
        cfg = RotationConfig(window_deg=170.0, shift_deg=300.0)
        with pytest.raises(ValueError):
            cfg.derived_px(36)
