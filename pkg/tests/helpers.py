"""Shared test fixtures: synthetic panoramas and panning sequences.

The pan generator is the ground-truth oracle for turn prediction: a
camera turning left moves scene content to the right, so rolling a
panorama's columns by +s pixels constructs a frame pair whose true label
is LEFT by construction (and -s constructs RIGHT).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from navaug.actions import Action
from navaug.frames import Frame


def smooth_noise_field(
    rng: np.random.Generator, height: int, width: int, blur: int, std: float = 0.2
) -> np.ndarray:
    """Gaussian noise box-blurred along columns (circularly), row-independent.

    Horizontal autocorrelation decays linearly to zero at lag `blur`, so
    window MSE grows monotonically with misalignment up to that lag.
    """
    x = rng.normal(size=(height, width))
    y = uniform_filter1d(x, size=max(blur, 1), axis=1, mode="wrap")
    y = y - y.mean()
    s = y.std()
    if s > 0:
        y = y * (std / s)
    return np.clip(0.5 + y, 0.0, 1.0)


def stripe_field(
    rng: np.random.Generator,
    height: int,
    width: int,
    min_run: int,
    max_run: int,
    noise_std: float = 0.12,
) -> np.ndarray:
    """Random-width vertical stripes plus low-amplitude smooth noise.

    The noise keeps wide stripes from producing exactly-constant windows,
    so misaligned comparisons always score above aligned ones.
    """
    profile = np.empty(width)
    pos = 0
    value = rng.uniform(0.1, 0.9)
    while pos < width:
        run = int(rng.integers(min_run, max_run + 1))
        profile[pos : pos + run] = value
        pos += run
        nxt = rng.uniform(0.1, 0.9)
        while abs(nxt - value) < 0.2:  # adjacent stripes must contrast
            nxt = rng.uniform(0.1, 0.9)
        value = nxt
    jitter = smooth_noise_field(rng, height, width, blur=max_run, std=noise_std) - 0.5
    return np.clip(profile[np.newaxis, :] + jitter, 0.0, 1.0)


def random_panorama(
    rng: np.random.Generator,
    width: int,
    height: int,
    channels: int = 1,
    texture: str = "stripes",
    shift_px: int | None = None,
) -> Frame:
    """A panorama frame; `shift_px` scales the texture's feature size."""
    base = shift_px if shift_px is not None else max(width // 6, 4)
    fields = []
    for _ in range(channels):
        if texture == "stripes":
            fields.append(stripe_field(rng, height, width, min_run=max(base, 3), max_run=max(2 * base, 4)))
        elif texture == "noise":
            fields.append(smooth_noise_field(rng, height, width, blur=base))
        else:
            raise ValueError(f"unknown texture {texture!r}")
    return Frame.from_array(np.stack(fields, axis=2))


def panned(frame: Frame, pan_px: int) -> Frame:
    """Roll panorama content horizontally; +pan_px means the camera turned left."""
    return Frame.from_array(np.roll(frame.pixels, pan_px, axis=1))


def pan_pair(frame: Frame, action: Action, pan_px: int) -> tuple[Frame, Frame]:
    """(frame_t, frame_t1) whose ground-truth label is `action`."""
    if action is Action.LEFT:
        return frame, panned(frame, pan_px)
    if action is Action.RIGHT:
        return frame, panned(frame, -pan_px)
    if action is Action.FORWARD:
        return frame, frame
    raise ValueError(f"cannot construct a pan pair for {action}")


def pan_sequence(frame: Frame, actions: list[Action], pan_px: int) -> list[Frame]:
    """Frames realizing the given ground-truth action sequence."""
    frames = [frame]
    for action in actions:
        _, nxt = pan_pair(frames[-1], action, pan_px)
        frames.append(nxt)
    return frames


def write_pan_clip(root, video_id, actions, rotation, seed=0, width=144, height=8):
    """PNG frames realizing `actions` plus the matching manifest record.

    Frames land in root/frames/; paths in the record are root-relative.
    """
    from navaug.frames import save_frame

    rng = np.random.default_rng(seed)
    shift = rotation.shift_px(width)
    base = random_panorama(rng, width, height, texture="stripes", shift_px=shift)
    frames = pan_sequence(base, list(actions), shift)
    frame_dir = Path(root) / "frames"
    frame_dir.mkdir(exist_ok=True)
    entries = []
    for i, frame in enumerate(frames):
        rel = f"frames/{video_id}_{i}.png"
        save_frame(frame, Path(root) / rel)
        entries.append({"index": i, "path": rel, "t": float(i)})
    return {"video_id": video_id, "frames": entries}
