"""Binary container for named f32 tensors (model weights, mean images).

Layout: magic ``EYTH`` | version u16 LE | header length u32 LE | UTF-8 JSON
header | zero padding to a 16-byte boundary | little-endian f32 blob. Header
entries carry name/shape/offset (offsets relative to the blob start, each
16-byte aligned) plus a config fingerprint checked on load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EYTH"
VERSION = 1
_ALIGN = 16


class WeightFormatError(ValueError):
    """Malformed, truncated, or mismatched weight container."""


def _aligned(n: int) -> int:
    return (n + _ALIGN - 1) // _ALIGN * _ALIGN


def save_tensors(tensors: dict[str, np.ndarray], fingerprint: str,
                 destination: str | Path | None = None) -> bytes:
    """Serialize named tensors; returns the bytes and optionally writes them."""
    entries = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        raw = arr.tobytes()
        blobs.append(raw)
        offset = _aligned(offset + len(raw))
    header = json.dumps({"fingerprint": fingerprint, "tensors": entries},
                        separators=(",", ":")).encode("utf-8")
    prefix = MAGIC + struct.pack("<HI", VERSION, len(header)) + header
    blob_start = _aligned(len(prefix))
    out = bytearray(prefix)
    out.extend(b"\x00" * (blob_start - len(prefix)))
    for entry, raw in zip(entries, blobs):
        pos = blob_start + entry["offset"]
        out.extend(b"\x00" * (pos - len(out)))
        out.extend(raw)
    data = bytes(out)
    if destination is not None:
        Path(destination).write_bytes(data)
    return data


def load_tensors(data: bytes | str | Path,
                 expected_fingerprint: str | None = None,
                 expected_shapes: dict[str, tuple] | None = None) -> dict[str, np.ndarray]:
    """Parse a container; every validation failure precedes any output."""
    if isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    if len(data) < 10 or data[:4] != MAGIC:
        raise WeightFormatError("not a weight container (bad magic)")
    version, header_len = struct.unpack("<HI", data[4:10])
    if version != VERSION:
        raise WeightFormatError(f"unsupported container version {version}")
    if len(data) < 10 + header_len:
        raise WeightFormatError("truncated header")
    try:
        header = json.loads(data[10:10 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"unreadable header: {exc}") from exc

    fingerprint = header.get("fingerprint", "")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise WeightFormatError(
            f"config fingerprint mismatch: container has {fingerprint!r}, "
            f"expected {expected_fingerprint!r}")

    blob_start = _aligned(10 + header_len)
    tensors: dict[str, np.ndarray] = {}
    for entry in header.get("tensors", []):
        name = entry["name"]
        if name in tensors:
            raise WeightFormatError(f"duplicate tensor {name!r}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = blob_start + entry["offset"]
        end = start + count * 4
        if end > len(data):
            raise WeightFormatError(f"truncated blob while reading tensor {name!r}")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=start)
        tensors[name] = arr.reshape(shape).copy()

    if expected_shapes is not None:
        missing = sorted(set(expected_shapes) - set(tensors))
        if missing:
            raise WeightFormatError(f"missing tensor {missing[0]!r}")
        unknown = sorted(set(tensors) - set(expected_shapes))
        if unknown:
            raise WeightFormatError(f"unknown tensor {unknown[0]!r}")
        for name, shape in expected_shapes.items():
            if tensors[name].shape != tuple(shape):
                raise WeightFormatError(
                    f"tensor {name!r} has shape {tensors[name].shape}, expected {tuple(shape)}")
    return tensors


def read_fingerprint(data: bytes | str | Path) -> str:
    if isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    if len(data) < 10 or data[:4] != MAGIC:
        raise WeightFormatError("not a weight container (bad magic)")
    _, header_len = struct.unpack("<HI", data[4:10])
    header = json.loads(data[10:10 + header_len].decode("utf-8"))
    return header.get("fingerprint", "")
