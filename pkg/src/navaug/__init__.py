"""Navigation-video augmentation: action prediction, instruction
generation, and pretraining-sample assembly for egocentric clips."""

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
from navaug.errors import (
    ClipRejectedError,
    DegenerateGeometryError,
    GenerationFailedError,
    InvalidTrajectoryError,
    MissingTemplateError,
    NavaugError,
    ParseError,
    UnreachableGoalError,
)
from navaug.frames import Frame, load_frame, save_frame

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionPrediction",
    "Candidate",
    "ClipRejectedError",
    "DegenerateGeometryError",
    "Frame",
    "GenerationFailedError",
    "InvalidTrajectoryError",
    "MissingTemplateError",
    "NavaugError",
    "ParseError",
    "RotationConfig",
    "UnreachableGoalError",
    "ValidRegion",
    "load_frame",
    "predict_action",
    "predict_sequence",
    "rotate_frame",
    "save_frame",
    "windowed_mse",
]
