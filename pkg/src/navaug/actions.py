"""Navigation action prediction from consecutive frames.

A turn shifts the visible scene horizontally: turning left moves content
to the right of the next frame, turning right moves it left. Each turn
hypothesis is tested by shifting the later frame's content back by the
configured angle and measuring windowed MSE against the earlier frame;
the hypothesis whose designated window is most similar wins.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from ._kernels import mse_windows
from .errors import DegenerateGeometryError
from .frames import Frame, downscale_columns

logger = logging.getLogger(__name__)


class Action(str, enum.Enum):
    FORWARD = "forward"
    LEFT = "left"
    RIGHT = "right"
    STOP = "stop"


class Candidate(str, enum.Enum):
    LEFT_ROTATED = "left_rotated"
    UNCHANGED = "unchanged"
    RIGHT_ROTATED = "right_rotated"


CANDIDATE_LABEL = {
    Candidate.LEFT_ROTATED: Action.LEFT,
    Candidate.UNCHANGED: Action.FORWARD,
    Candidate.RIGHT_ROTATED: Action.RIGHT,
}

# Ties resolve to the highest-prior label first (forward dominates real
# driving data by a wide margin), then left.
_TIE_ORDER = (Candidate.UNCHANGED, Candidate.LEFT_ROTATED, Candidate.RIGHT_ROTATED)


@dataclass(frozen=True)
class ValidRegion:
    """Half-open column interval [start, stop) untouched by the shift band."""

    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class RotationConfig:
    """Geometry of the rotate-and-compare test.

    Angles are interpreted against ``frame_fov_deg``, the horizontal field
    of view one frame covers; 360 matches full panoramas, dashcam footage
    can narrow it.
    """

    window_deg: float = 80.0
    shift_deg: float = 60.0
    frame_fov_deg: float = 360.0
    tie_epsilon: float = 1e-9
    downscale_width: int | None = None

    def __post_init__(self):
        if not 0 < self.shift_deg < self.frame_fov_deg:
            raise ValueError("shift_deg must lie strictly between 0 and frame_fov_deg")
        if not 0 < self.window_deg < self.frame_fov_deg:
            raise ValueError("window_deg must lie strictly between 0 and frame_fov_deg")
        if self.tie_epsilon < 0:
            raise ValueError("tie_epsilon must be non-negative")
        if self.downscale_width is not None and self.downscale_width < 1:
            raise ValueError("downscale_width must be >= 1")

    def shift_px(self, width: int) -> int:
        return int(round(self.shift_deg / self.frame_fov_deg * width))

    def window_px(self, width: int) -> int:
        return int(round(self.window_deg / self.frame_fov_deg * width))

    def derived_px(self, width: int) -> tuple[int, int]:
        """(shift, window) in pixels for a frame of this width, validated."""
        r = self.shift_px(width)
        d = self.window_px(width)
        if not 1 <= d <= width - r:
            raise ValueError(
                f"window of {d}px does not fit beside a shift band of {r}px in a {width}px frame"
            )
        return r, d


@dataclass(frozen=True)
class WindowScores:
    """Per-window MSE values for one candidate, left window first."""

    candidate: Candidate
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.scores) < 1:
            raise ValueError("at least one window score is required")


@dataclass(frozen=True)
class ActionPrediction:
    label: Action
    decision_scores: dict[Candidate, float] = field(compare=False)
    windows: tuple[WindowScores, WindowScores, WindowScores] = field(compare=False)

    def diagnostic_records(self, frame_index: int) -> list[dict]:
        """One exportable record per candidate."""
        return [
            {
                "frame_index": frame_index,
                "candidate": ws.candidate.value,
                "window_scores": list(ws.scores),
                "label": self.label.value,
            }
            for ws in self.windows
        ]


def rotate_frame(frame: Frame, direction: Action, shift_px: int) -> tuple[Frame, ValidRegion]:
    """Shift frame content horizontally to test a turn hypothesis.

    ``direction`` names the hypothesized turn. A left turn moves scene
    content rightward between frames, so the LEFT hypothesis shifts
    content back to the left (and vice versa). The vacated band of width
    ``shift_px`` is zero-filled and excluded via the returned region.
    """
    if direction not in (Action.LEFT, Action.RIGHT):
        raise ValueError(f"direction must be LEFT or RIGHT, got {direction}")
    w = frame.width
    if not 0 <= shift_px < w:
        raise ValueError(f"shift_px must satisfy 0 <= shift < width ({w}), got {shift_px}")
    if shift_px == 0:
        return frame, ValidRegion(0, w)
    out = np.zeros_like(frame.pixels)
    if direction is Action.LEFT:
        out[:, : w - shift_px, :] = frame.pixels[:, shift_px:, :]
        valid = ValidRegion(0, w - shift_px)
    else:
        out[:, shift_px:, :] = frame.pixels[:, : w - shift_px, :]
        valid = ValidRegion(shift_px, w)
    return Frame(out), valid


def windowed_mse(
    reference: Frame,
    candidate: Frame,
    valid: ValidRegion,
    cfg: RotationConfig,
    kind: Candidate = Candidate.UNCHANGED,
) -> WindowScores:
    """Slide a window of the configured width across the valid region.

    Windows advance left to right with stride equal to their width; each
    score is the mean squared per-pixel, per-channel difference inside the
    window. Exactly floor(valid_width / window_px) scores are produced.
    """
    if reference.pixels.shape != candidate.pixels.shape:
        raise ValueError(
            f"frame dimensions differ: {reference.pixels.shape} vs {candidate.pixels.shape}"
        )
    width = reference.width
    if not 0 <= valid.start <= valid.stop <= width:
        raise ValueError(f"valid region {valid} out of bounds for width {width}")
    d = cfg.window_px(width)
    count = valid.width // d
    if count < 1:
        raise DegenerateGeometryError(
            f"no {d}px window fits in a valid region of width {valid.width}"
        )
    scores = mse_windows(
        np.ascontiguousarray(reference.pixels),
        np.ascontiguousarray(candidate.pixels),
        valid.start,
        d,
        count,
    )
    return WindowScores(candidate=kind, scores=tuple(float(s) for s in scores))


def predict_action(frame_t: Frame, frame_t1: Frame, cfg: RotationConfig | None = None) -> ActionPrediction:
    """Label the transition between two consecutive frames.

    The left-rotated candidate is judged at its rightmost window, the
    unchanged candidate at its middle window, and the right-rotated
    candidate at its leftmost window; the lowest MSE wins. Scores tying
    within ``tie_epsilon`` of the minimum resolve to forward, then left.
    """
    cfg = cfg or RotationConfig()
    if frame_t.pixels.shape != frame_t1.pixels.shape:
        raise ValueError(
            f"frame dimensions differ: {frame_t.pixels.shape} vs {frame_t1.pixels.shape}"
        )
    if cfg.downscale_width is not None:
        frame_t = downscale_columns(frame_t, cfg.downscale_width)
        frame_t1 = downscale_columns(frame_t1, cfg.downscale_width)
    width = frame_t.width
    r, _ = cfg.derived_px(width)

    rotated_left, valid_left = rotate_frame(frame_t1, Action.LEFT, r)
    rotated_right, valid_right = rotate_frame(frame_t1, Action.RIGHT, r)

    ws_left = windowed_mse(frame_t, rotated_left, valid_left, cfg, Candidate.LEFT_ROTATED)
    ws_fwd = windowed_mse(frame_t, frame_t1, ValidRegion(0, width), cfg, Candidate.UNCHANGED)
    ws_right = windowed_mse(frame_t, rotated_right, valid_right, cfg, Candidate.RIGHT_ROTATED)

    least = min(len(ws_left.scores), len(ws_fwd.scores), len(ws_right.scores))
    if least < 3:
        logger.warning(
            "only %d comparison window(s); leftmost/middle/rightmost indices may coincide", least
        )

    decision = {
        Candidate.LEFT_ROTATED: ws_left.scores[-1],
        Candidate.UNCHANGED: ws_fwd.scores[len(ws_fwd.scores) // 2],
        Candidate.RIGHT_ROTATED: ws_right.scores[0],
    }
    best = min(decision.values())
    winner = next(c for c in _TIE_ORDER if decision[c] <= best + cfg.tie_epsilon)
    return ActionPrediction(
        label=CANDIDATE_LABEL[winner],
        decision_scores=decision,
        windows=(ws_left, ws_fwd, ws_right),
    )


def predict_sequence(frames: list[Frame], cfg: RotationConfig | None = None) -> list[ActionPrediction]:
    """Predict one action per consecutive frame pair, in order."""
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames, got {len(frames)}")
    shape = frames[0].pixels.shape
    for i, f in enumerate(frames[1:], start=1):
        if f.pixels.shape != shape:
            raise ValueError(f"frame {i} shape {f.pixels.shape} differs from first frame {shape}")
    return [predict_action(frames[i], frames[i + 1], cfg) for i in range(len(frames) - 1)]
