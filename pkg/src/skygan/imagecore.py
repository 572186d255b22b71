"""Image tensor representation, quantization rules, and lossless 8-bit RGB file I/O.

All images in the pipeline are H×W×C float stacks with values in [0,1],
channel-last. File I/O is 8-bit RGB PNG; quantization is round-half-up so
that save/load round-trips are byte-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError


@dataclass(frozen=True)
class ImageTensor:
    """H×W×C float image, every value finite and inside [0,1].

    The wrapped array is made read-only on construction, so instances are
    immutable values that can be shared freely across parallel workers.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"image data must be non-empty H×W×C, got shape {arr.shape}")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("image data contains non-finite values")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"image data outside [0,1]: min={lo}, max={hi}")
        if arr.flags.writeable:
            if arr is self.data:
                arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class DatasetPair:
    """A hazy/clean image pair sharing dimensions, tagged with its haze level."""

    hazy: ImageTensor
    clean: ImageTensor
    haze_level: int
    source_id: str

    def __post_init__(self):
        if self.hazy.data.shape != self.clean.data.shape:
            raise ValueError(
                f"hazy {self.hazy.data.shape} and clean {self.clean.data.shape} "
                "must share dimensions"
            )
        if self.hazy.channels != 3:
            raise ValueError("dataset pairs are 3-channel RGB")
        if self.haze_level not in (1, 2, 3, 4, 5):
            raise ValueError(f"haze_level must be 1..5, got {self.haze_level}")


def load_image(path) -> ImageTensor:
    """Load an 8-bit RGB raster as a float64 ImageTensor with values v/255.

    Raises FileNotFoundError for a missing file and DecodeError (naming the
    path) for non-RGB or corrupt files.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            if im.mode != "RGB":
                raise DecodeError(f"{path}: expected 8-bit RGB, got mode {im.mode!r}")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise DecodeError(f"{path}: not a decodable raster ({exc})") from exc
    except OSError as exc:
        raise DecodeError(f"{path}: corrupt raster ({exc})") from exc
    return ImageTensor(arr.astype(np.float64) / 255.0)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Map [0,1] floats to bytes with round-half-up, clamped to [0,255]."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(
        np.uint8
    )


def save_image(img: ImageTensor, path) -> None:
    """Write a 3-channel ImageTensor as an 8-bit RGB PNG (byte = round(v*255))."""
    if img.channels != 3:
        raise ValueError(f"save_image requires 3 channels, got {img.channels}")
    Image.fromarray(quantize_u8(img.data), mode="RGB").save(Path(path), format="PNG")


def _axis_offsets(size: int, tile: int, stride: int) -> list[int]:
    offsets = list(range(0, size - tile + 1, stride))
    if offsets[-1] + tile < size:
        offsets.append(size - tile)
    return offsets


def crop_tiles(img: ImageTensor, tile: int, stride: int) -> list[ImageTensor]:
    """All tile×tile windows at stride offsets, plus final windows flush to each edge.

    Tiles are ordered row-major by offset. Every pixel is covered at least
    once whenever stride <= tile.
    """
    if tile > min(img.height, img.width):
        raise ValueError(f"tile {tile} exceeds image size {img.height}×{img.width}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    tiles = []
    for oy in _axis_offsets(img.height, tile, stride):
        for ox in _axis_offsets(img.width, tile, stride):
            tiles.append(ImageTensor(img.data[oy : oy + tile, ox : ox + tile, :]))
    return tiles
