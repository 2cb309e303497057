"""Clip-to-sample pipeline: sample frames at a fixed interval, predict
and merge actions, and generate one instruction sentence per merged
segment plus a terminal stop sentence.
"""

from __future__ import annotations

import hashlib
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from navaug.actions import Action, RotationConfig, predict_sequence
from navaug.detections import ClassFilter, DetectionStore, apply_class_filter, select_object
from navaug.errors import ClipRejectedError, GenerationFailedError, ParseError
from navaug.frames import load_frame
from navaug.jsonl import read_jsonl
from navaug.templates import Category, TemplateBank, TemplateSampler, fill_template

logger = logging.getLogger(__name__)

DEFAULT_INTERVAL_S = 1.0
DEFAULT_LENGTH_RANGE = (25, 40)
MAX_FORWARD_RUN = 6
OBJECT_RESAMPLE_LIMIT = 5
RECENT_CLASS_WINDOW = 2

CATEGORY_FOR_ACTION = {
    Action.LEFT: Category.TURN_LEFT,
    Action.RIGHT: Category.TURN_RIGHT,
    Action.FORWARD: Category.FORWARD,
    Action.STOP: Category.STOP,
}


@dataclass(frozen=True)
class FrameEntry:
    index: int
    path: str
    t: float


@dataclass(frozen=True)
class VideoClip:
    video_id: str
    frames: tuple[FrameEntry, ...]

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError(f"clip {self.video_id!r} has an empty manifest")
        times = [f.t for f in self.frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"clip {self.video_id!r} timestamps must strictly increase")

    @property
    def duration(self) -> float:
        return self.frames[-1].t - self.frames[0].t


@dataclass(frozen=True)
class ActionSegment:
    action: Action
    start_frame: int
    end_frame: int
    length: int

    def __post_init__(self) -> None:
        if self.start_frame >= self.end_frame and self.action is not Action.STOP:
            raise ValueError("segment must span at least one hop")
        if self.action is Action.FORWARD and self.length > MAX_FORWARD_RUN:
            raise ValueError(f"forward segment longer than {MAX_FORWARD_RUN}")
        if self.length < 1:
            raise ValueError("segment length must be >= 1")


@dataclass(frozen=True)
class VlnSample:
    sample_id: str
    video_id: str
    frames: tuple[str, ...]
    actions: tuple[Action, ...]
    segments: tuple[ActionSegment, ...]
    instruction: str
    provenance: tuple[dict, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "video_id": self.video_id,
            "frames": list(self.frames),
            "actions": [a.value for a in self.actions],
            "segments": [
                {
                    "action": s.action.value,
                    "start_frame": s.start_frame,
                    "end_frame": s.end_frame,
                    "length": s.length,
                }
                for s in self.segments
            ],
            "instruction": self.instruction,
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "VlnSample":
        return cls(
            sample_id=str(doc["sample_id"]),
            video_id=str(doc["video_id"]),
            frames=tuple(str(f) for f in doc["frames"]),
            actions=tuple(Action(a) for a in doc["actions"]),
            segments=tuple(
                ActionSegment(
                    Action(s["action"]), int(s["start_frame"]), int(s["end_frame"]), int(s["length"])
                )
                for s in doc["segments"]
            ),
            instruction=str(doc["instruction"]),
            provenance=tuple(dict(p) for p in doc.get("provenance", [])),
        )


def clip_rng(seed: int, video_id: str) -> np.random.Generator:
    """Schedule-independent per-clip generator: the clip id is hashed with
    sha256 so results do not depend on process hash randomization."""
    digest = hashlib.sha256(video_id.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


def sample_frames(
    clip: VideoClip,
    rng: np.random.Generator,
    interval_s: float = DEFAULT_INTERVAL_S,
    length_range: tuple[int, int] = DEFAULT_LENGTH_RANGE,
) -> tuple[list[FrameEntry], list[str]]:
    """Frames nearest to interval_s multiples from a random start offset.

    Returns (frames, warnings). Shorter clips yield all available sampled
    frames (at least 2) with a warning instead of failing.
    """
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")
    lo, hi = length_range
    if not 2 <= lo <= hi:
        raise ValueError(f"bad length_range {length_range}")
    if len(clip.frames) < 2 or clip.duration < interval_s:
        raise ClipRejectedError(
            f"clip {clip.video_id!r} too short: {len(clip.frames)} frames over {clip.duration:.2f}s"
        )
    target = int(rng.integers(lo, hi + 1))
    offset = float(rng.uniform(0.0, interval_s))
    t0 = clip.frames[0].t + offset
    times = np.array([f.t for f in clip.frames])
    chosen: list[FrameEntry] = []
    for k in range(target):
        want = t0 + k * interval_s
        if want > clip.frames[-1].t + interval_s / 2:
            break
        nearest = int(np.argmin(np.abs(times - want)))
        entry = clip.frames[nearest]
        if chosen and entry.index == chosen[-1].index:
            continue
        chosen.append(entry)
    warnings = []
    if len(chosen) < 2:
        raise ClipRejectedError(f"clip {clip.video_id!r} yields fewer than 2 sampled frames")
    if len(chosen) < target:
        warnings.append(
            f"clip {clip.video_id!r}: wanted {target} frames, clip supports {len(chosen)}"
        )
    return chosen, warnings


def merge_actions(primitive: Sequence[Action]) -> list[ActionSegment]:
    """Runs of identical labels become segments; FORWARD runs split
    greedily into chunks of at most 6, turn runs merge whole."""
    for action in primitive:
        if action is Action.STOP:
            raise ValueError("STOP is appended after merging, not merged")
        if action not in (Action.FORWARD, Action.LEFT, Action.RIGHT):
            raise ValueError(f"unexpected action {action!r}")
    segments: list[ActionSegment] = []
    i = 0
    n = len(primitive)
    while i < n:
        j = i
        while j < n and primitive[j] is primitive[i]:
            j += 1
        if primitive[i] is Action.FORWARD:
            for start in range(i, j, MAX_FORWARD_RUN):
                end = min(start + MAX_FORWARD_RUN, j)
                segments.append(ActionSegment(Action.FORWARD, start, end, end - start))
        else:
            segments.append(ActionSegment(primitive[i], i, j, j - i))
        i = j
    return segments


def expand_segments(segments: Sequence[ActionSegment]) -> list[Action]:
    """Inverse of merge_actions (terminal STOP segments excluded)."""
    out: list[Action] = []
    for seg in segments:
        if seg.action is Action.STOP:
            continue
        out.extend([seg.action] * seg.length)
    return out


def generate_instruction(
    segments: Sequence[ActionSegment],
    bank: TemplateBank,
    frame_objects: Sequence,
    rng: np.random.Generator,
) -> tuple[str, list[dict]]:
    """One sentence per motion segment plus a terminal stop sentence.

    `frame_objects` holds class-filtered detections for each segment's
    first frame, plus a final entry (the trajectory's last frame) for the
    stop sentence. Slotted templates resample up to 5 times when no
    object is available; a slotless template must then exist.
    """
    if len(frame_objects) != len(segments) + 1:
        raise ValueError("need one detection set per segment plus one for the stop sentence")
    sampler = TemplateSampler(bank, rng)
    sentences: list[str] = []
    provenance: list[dict] = []
    recent_by_sentence: list[list[str]] = []

    def compose(category: Category, fd, segment_index: int) -> None:
        cooldown = [name for used in recent_by_sentence[-RECENT_CLASS_WINDOW:] for name in used]
        chosen = None
        for _ in range(OBJECT_RESAMPLE_LIMIT):
            template = sampler.sample_template(category)
            if not template.has_slot:
                chosen = (template, None)
                break
            obj = select_object(fd, cooldown, rng)
            if obj is not None:
                chosen = (template, obj)
                break
        if chosen is None:
            slotless = [
                st.template for st in bank.templates(category) if not st.template.has_slot
            ]
            if not slotless:
                raise GenerationFailedError(
                    f"no fillable {category.value} template for sentence {segment_index}"
                )
            chosen = (slotless[int(rng.integers(0, len(slotless)))], None)
        template, obj = chosen
        sentences.append(fill_template(template, obj))
        provenance.append(
            {
                "segment_index": segment_index,
                "template_id": template.source_sentence_id,
                "object": obj,
            }
        )
        recent_by_sentence.append([obj] if obj is not None else [])

    for idx, segment in enumerate(segments):
        compose(CATEGORY_FOR_ACTION[segment.action], frame_objects[idx], idx)
    compose(Category.STOP, frame_objects[len(segments)], len(segments))
    return " ".join(sentences), provenance


@dataclass(frozen=True)
class PipelineConfig:
    interval_s: float = DEFAULT_INTERVAL_S
    length_range: tuple[int, int] = DEFAULT_LENGTH_RANGE
    rotation: RotationConfig = field(default_factory=RotationConfig)
    class_filter: ClassFilter = field(default_factory=ClassFilter)


def load_clips(path) -> list[VideoClip]:
    """Clip manifest JSONL -> clips in file order; ids must be unique."""
    clips: list[VideoClip] = []
    seen: set[str] = set()
    for line_no, record in read_jsonl(path):
        try:
            video_id = str(record["video_id"])
            frames = tuple(
                FrameEntry(int(f["index"]), str(f["path"]), float(f["t"]))
                for f in record["frames"]
            )
            clip = VideoClip(video_id, frames)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), line_no, f"bad clip record: {exc}") from exc
        if video_id in seen:
            raise ParseError(str(path), line_no, f"duplicate video_id {video_id!r}")
        seen.add(video_id)
        clips.append(clip)
    return clips


def resolve_frame_path(manifest_dir, frame_path: str):
    """Manifest-relative frame paths resolve against the manifest's dir."""
    from pathlib import Path

    p = Path(frame_path)
    return p if p.is_absolute() else Path(manifest_dir) / p


def build_clip_sample(
    clip: VideoClip,
    bank: TemplateBank,
    store: DetectionStore,
    cfg: PipelineConfig,
    seed: int,
    manifest_dir,
) -> tuple[VlnSample, list[str]]:
    """One VlnSample from one clip; raises on rejection or failure."""
    rng = clip_rng(seed, clip.video_id)
    entries, warnings = sample_frames(clip, rng, cfg.interval_s, cfg.length_range)
    pixels = [load_frame(resolve_frame_path(manifest_dir, e.path)) for e in entries]
    predictions = predict_sequence(pixels, cfg.rotation)
    primitives = [p.label for p in predictions]
    motion_segments = merge_actions(primitives)

    def filtered(entry: FrameEntry):
        fd = store.for_frame(clip.video_id, entry.index)
        return apply_class_filter(fd, cfg.class_filter)

    frame_objects = [filtered(entries[seg.start_frame]) for seg in motion_segments]
    frame_objects.append(filtered(entries[-1]))
    instruction, provenance = generate_instruction(motion_segments, bank, frame_objects, rng)

    last = len(entries) - 1
    segments = tuple(motion_segments) + (ActionSegment(Action.STOP, last, last, 1),)
    sample = VlnSample(
        sample_id=f"{clip.video_id}#0",
        video_id=clip.video_id,
        frames=tuple(e.path for e in entries),
        actions=tuple(primitives) + (Action.STOP,),
        segments=segments,
        instruction=instruction,
        provenance=tuple(provenance),
    )
    return sample, warnings


def run_pipeline(
    clips: Sequence[VideoClip],
    bank: TemplateBank,
    store: DetectionStore,
    cfg: PipelineConfig,
    seed: int,
    manifest_dir,
    max_workers: int = 1,
) -> tuple[list[VlnSample], dict]:
    """All clips -> samples plus a run report; per-clip failures are
    recorded, never fatal. Output is ordered by video_id so worker count
    cannot change bytes."""
    from concurrent.futures import ThreadPoolExecutor

    def one(clip: VideoClip):
        try:
            sample, warnings = build_clip_sample(clip, bank, store, cfg, seed, manifest_dir)
            return clip.video_id, sample, warnings, None
        except Exception as exc:  # per-clip isolation
            logger.warning("clip %s failed: %s", clip.video_id, exc)
            return clip.video_id, None, [], f"{type(exc).__name__}: {exc}"

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(one, clips))
    else:
        outcomes = [one(clip) for clip in clips]
    outcomes.sort(key=lambda item: item[0])

    samples: list[VlnSample] = []
    failures: list[dict] = []
    warnings: list[str] = []
    histogram: dict[str, int] = {}
    for video_id, sample, clip_warnings, error in outcomes:
        warnings.extend(clip_warnings)
        if error is not None:
            failures.append({"video_id": video_id, "error": error})
            continue
        samples.append(sample)
        for action in sample.actions:
            histogram[action.value] = histogram.get(action.value, 0) + 1
    report = {
        "clips_in": len(clips),
        "samples_out": len(samples),
        "rejected": len(failures),
        "action_histogram": histogram,
        "failures": failures,
        "warnings": sorted(warnings),
    }
    return samples, report
