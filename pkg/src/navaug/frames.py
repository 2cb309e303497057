"""Frame pixel grids: validated float arrays plus image-file loading."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class Frame:
    """An H x W x C intensity grid with all values in [0, 1].

    `pixels` is float64 with shape (H, W, C), C in {1, 3}. Instances are
    immutable after construction; the array is marked read-only so frames
    can be shared across workers.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3:
            raise ValueError(f"frame pixels must be 3-dimensional, got shape {px.shape}")
        h, w, c = px.shape
        if h < 1 or w < 1:
            raise ValueError(f"frame must be at least 1x1, got {h}x{w}")
        if c not in (1, 3):
            raise ValueError(f"frame must have 1 or 3 channels, got {c}")
        if px.dtype != np.float64:
            raise ValueError(f"frame pixels must be float64, got {px.dtype}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise ValueError("frame intensities must lie in [0, 1]")
        px.setflags(write=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @classmethod
    def from_array(cls, array: np.ndarray) -> "Frame":
        """Build a frame from (H, W) or (H, W, C) data, copying and casting."""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        return cls(np.ascontiguousarray(arr))

    def mirrored(self) -> "Frame":
        """Left-right mirror; used by symmetry checks."""
        return Frame(np.ascontiguousarray(self.pixels[:, ::-1, :]))


def load_frame(path: str | Path) -> Frame:
    """Load a PNG or JPEG file as a frame, normalizing intensities to [0, 1]."""
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            img = img.convert("L")
        else:
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    return Frame.from_array(arr)


def save_frame(frame: Frame, path: str | Path) -> None:
    """Write a frame as an 8-bit PNG (grayscale for C=1, RGB for C=3)."""
    arr = np.clip(np.rint(frame.pixels * 255.0), 0, 255).astype(np.uint8)
    if frame.channels == 1:
        img = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    img.save(path)


def downscale_columns(frame: Frame, target_width: int) -> Frame:
    """Reduce frame width by nearest-column subsampling; rows are untouched."""
    if target_width < 1:
        raise ValueError("target width must be >= 1")
    if target_width >= frame.width:
        return frame
    cols = np.floor(np.linspace(0, frame.width, num=target_width, endpoint=False)).astype(int)
    return Frame(np.ascontiguousarray(frame.pixels[:, cols, :]))
