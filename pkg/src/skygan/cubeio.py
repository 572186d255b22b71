"""Spectral cube file format: magic "HSC1", u32 LE dims (H, W, 31), f32 LE band-major data."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .colorcue import NUM_BANDS
from .errors import DecodeError
from .imagecore import ImageTensor

MAGIC = b"HSC1"
_HEADER = struct.Struct("<4sIII")


def save_cube(cube: ImageTensor, path) -> None:
    """Write a 31-band image; data is stored band-major (band 0 plane first)."""
    if cube.channels != NUM_BANDS:
        raise ValueError(f"spectral cubes have {NUM_BANDS} bands, got {cube.channels}")
    planes = np.ascontiguousarray(np.transpose(cube.data, (2, 0, 1)), dtype="<f4")
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, cube.height, cube.width, NUM_BANDS))
        fh.write(planes.tobytes())


def load_cube(path) -> ImageTensor:
    """Read a spectral cube; errors name the path for missing or malformed files."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such cube file: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DecodeError(f"{path}: truncated cube header")
    magic, h, w, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DecodeError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if c != NUM_BANDS:
        raise DecodeError(f"{path}: expected {NUM_BANDS} bands, header says {c}")
    expected = _HEADER.size + h * w * c * 4
    if len(raw) != expected:
        raise DecodeError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    planes = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    try:
        return ImageTensor(np.transpose(planes, (1, 2, 0)).astype(np.float32))
    except ValueError as exc:
        raise DecodeError(f"{path}: {exc}") from exc
