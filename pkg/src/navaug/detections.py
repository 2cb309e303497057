"""Per-frame object detections: ingestion, class blocklisting, and
confidence-weighted object selection for instruction slots.
"""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from navaug.errors import ParseError
from navaug.jsonl import read_jsonl

logger = logging.getLogger(__name__)

DEFAULT_BLOCKED_CLASSES = (
    "bus",
    "car(automobile)",
    "license plate",
    "wheel",
    "rearview mirror",
    "taillight",
)

_PAREN = re.compile(r"^(?P<base>[^()]*?)\s*\(\s*(?P<alias>[^()]*?)\s*\)\s*$")


def normalize_class(name: str) -> str:
    return " ".join(name.lower().split())


def alias_forms(name: str) -> frozenset[str]:
    """Match keys for a class name: the full form plus, for names like
    "car(automobile)", both the base and the parenthetical alias."""
    norm = normalize_class(name)
    m = _PAREN.match(norm)
    if m:
        return frozenset({norm, m.group("base"), m.group("alias")})
    return frozenset({norm})


def display_class(name: str) -> str:
    """Class name as it should appear in a sentence (alias stripped)."""
    norm = normalize_class(name)
    m = _PAREN.match(norm)
    return m.group("base") if m else norm


@dataclass(frozen=True)
class FrameRef:
    video_id: str
    frame_index: int


@dataclass(frozen=True)
class Detection:
    class_name: str
    confidence: float
    bbox: tuple[float, float, float, float]
    frame_ref: FrameRef

    def __post_init__(self) -> None:
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        x, y, w, h = self.bbox
        if x < 0 or y < 0 or w <= 0 or h <= 0:
            raise ValueError(f"bad bbox {self.bbox}")


@dataclass(frozen=True)
class FrameDetections:
    frame_ref: FrameRef
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        ordered = tuple(
            sorted(self.detections, key=lambda d: -d.confidence)
        )
        for det in ordered:
            if det.frame_ref != self.frame_ref:
                raise ValueError("detection references a different frame")
        object.__setattr__(self, "detections", ordered)

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class ClassFilter:
    blocked_classes: frozenset[str] = frozenset(DEFAULT_BLOCKED_CLASSES)
    _keys: frozenset[str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocked_classes", frozenset(self.blocked_classes))
        keys: set[str] = set()
        for name in self.blocked_classes:
            keys |= alias_forms(name)
        object.__setattr__(self, "_keys", frozenset(keys))

    def blocks(self, class_name: str) -> bool:
        return bool(alias_forms(class_name) & self._keys)

    @classmethod
    def from_file(cls, path: str | Path) -> "ClassFilter":
        """One blocked class per line; blank lines ignored."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(frozenset(line.strip() for line in lines if line.strip()))


class DetectionStore:
    """Detections grouped by frame; unseen frames read as empty."""

    def __init__(self, grouped: dict[FrameRef, FrameDetections] | None = None) -> None:
        self._by_frame = dict(grouped or {})

    def for_frame(self, video_id: str, frame_index: int) -> FrameDetections:
        ref = FrameRef(video_id, int(frame_index))
        found = self._by_frame.get(ref)
        if found is not None:
            return found
        return FrameDetections(ref, ())

    def frames(self) -> list[FrameRef]:
        return sorted(self._by_frame, key=lambda r: (r.video_id, r.frame_index))

    def __len__(self) -> int:
        return sum(len(fd) for fd in self._by_frame.values())


def load_detections(path: str | Path) -> DetectionStore:
    """Detections JSONL -> store; records violating value invariants are
    skipped with a warning, structural problems raise with line numbers."""
    grouped: dict[FrameRef, list[Detection]] = {}
    for line_no, record in read_jsonl(path):
        try:
            ref = FrameRef(str(record["video_id"]), int(record["frame_index"]))
            class_name = str(record["class_name"])
            confidence = float(record["confidence"])
            bbox = tuple(float(v) for v in record["bbox"])
            if len(bbox) != 4:
                raise KeyError("bbox must have 4 entries")
        except (KeyError, TypeError) as exc:
            raise ParseError(str(path), line_no, f"bad detection record: {exc}") from exc
        try:
            det = Detection(class_name, confidence, bbox, ref)
        except ValueError as exc:
            logger.warning("%s:%d: skipping detection: %s", path, line_no, exc)
            continue
        grouped.setdefault(ref, []).append(det)
    return DetectionStore(
        {ref: FrameDetections(ref, tuple(dets)) for ref, dets in grouped.items()}
    )


def apply_class_filter(fd: FrameDetections, class_filter: ClassFilter) -> FrameDetections:
    kept = tuple(d for d in fd.detections if not class_filter.blocks(d.class_name))
    return FrameDetections(fd.frame_ref, kept)


def select_object(
    fd: FrameDetections,
    recently_used: Iterable[str],
    rng,
) -> str | None:
    """One detection drawn with probability proportional to confidence.

    Classes named in `recently_used` are excluded unless that would empty
    the pool. Returns the display form of the class, or None when the
    frame has no detections.
    """
    if not fd.detections:
        return None
    cooldown: set[str] = set()
    for name in recently_used:
        cooldown |= alias_forms(name)
    pool = [d for d in fd.detections if not (alias_forms(d.class_name) & cooldown)]
    if not pool:
        pool = list(fd.detections)
    total = sum(d.confidence for d in pool)
    if total <= 0.0:
        index = int(rng.integers(0, len(pool)))
    else:
        r = float(rng.random()) * total
        acc = 0.0
        index = len(pool) - 1
        for i, det in enumerate(pool):
            acc += det.confidence
            if r < acc:
                index = i
                break
    return display_class(pool[index].class_name)
