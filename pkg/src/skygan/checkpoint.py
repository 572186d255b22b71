"""Versioned binary checkpoint container.

Layout: magic "SKGC", u32 version, u64 header length, UTF-8 JSON header,
raw tensor payload. The header carries the bundle kind, network spec, loss
weights, free-form metadata, and a tensor index (name, dtype, shape, offset);
tensor data is little-endian, concatenated in name order so identical state
always serializes to identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"SKGC"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")

_DTYPES = {
    "float32": "<f4",
    "float64": "<f8",
    "int64": "<i8",
    "uint8": "|u1",
}
_NUMPY_TO_NAME = {np.dtype(v): k for k, v in _DTYPES.items()}


@dataclass
class Container:
    """In-memory view of a checkpoint: header fields plus named tensors."""

    kind: str
    spec: dict
    loss_weights: dict
    meta: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def save_container(path, container: Container) -> None:
    names = sorted(container.tensors)
    index = []
    offset = 0
    blobs = []
    for name in names:
        arr = np.asarray(container.tensors[name])
        dtype_name = _NUMPY_TO_NAME.get(arr.dtype.newbyteorder("="))
        if dtype_name is None:
            raise CheckpointError(f"unsupported tensor dtype {arr.dtype} for {name!r}")
        blob = np.ascontiguousarray(arr, dtype=_DTYPES[dtype_name]).tobytes()
        index.append(
            {"name": name, "dtype": dtype_name, "shape": list(arr.shape), "offset": offset}
        )
        offset += len(blob)
        blobs.append(blob)
    header = json.dumps(
        {
            "version": VERSION,
            "kind": container.kind,
            "spec": container.spec,
            "loss_weights": container.loss_weights,
            "meta": container.meta,
            "tensors": index,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    with open(Path(path), "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_container(path) -> Container:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no such checkpoint: {path}")
    raw = path.read_bytes()
    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"{path}: truncated prefix")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported container version {version}")
    if len(raw) < _PREFIX.size + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[_PREFIX.size : _PREFIX.size + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    payload = raw[_PREFIX.size + header_len :]
    tensors = {}
    for entry in header["tensors"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        start = entry["offset"]
        end = start + count * dtype.itemsize
        if end > len(payload):
            raise CheckpointError(f"{path}: tensor {entry['name']!r} exceeds payload")
        arr = np.frombuffer(payload[start:end], dtype=dtype).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(dtype.newbyteorder("="))
    return Container(
        kind=header["kind"],
        spec=header["spec"],
        loss_weights=header["loss_weights"],
        meta=header["meta"],
        tensors=tensors,
    )
