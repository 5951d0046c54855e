"""Binary snapshot files.

Layout::

    b"SEL3D" | version:u8 | header_len:u32 | header (JSON, UTF-8) | header_crc32:u32 | payload

The payload holds little-endian float64 arrays in header field order, each laid out as
``[component][z][y][x]``.  The header records ``n``, ``t``, ``step``, the field list,
the mollifier and a CRC-32 of the payload.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SEL3D"
VERSION = 1
SUFFIX = ".sel3d"
FIELDS = (("v", 3), ("d", 3), ("z", 3), ("pi", 1))


class SnapshotError(OSError):
    """Missing, truncated or corrupt snapshot file."""


@dataclass
class Snapshot:
    """Physical fields in memory order ``[component, x, y, z]``."""

    n: int
    t: float
    step: int
    fields: dict
    meta: dict = field(default_factory=dict)


def _to_file_order(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.transpose(*range(a.ndim - 3), -1, -2, -3), dtype="<f8")


def encode(snap: Snapshot) -> bytes:
    payload = b"".join(_to_file_order(np.asarray(snap.fields[name])).tobytes() for name, _ in FIELDS)
    header = {
        "n": snap.n,
        "t": snap.t,
        "step": snap.step,
        "fields": [[name, comps] for name, comps in FIELDS],
        "layout": "component,z,y,x",
        "dtype": "float64-le",
        "payload_crc32": zlib.crc32(payload),
        "meta": snap.meta,
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<BI", VERSION, len(hb)) + hb + struct.pack("<I", zlib.crc32(hb)) + payload


def decode(data: bytes, name: str = "<bytes>") -> Snapshot:
    if len(data) < 10 or data[:5] != MAGIC:
        raise SnapshotError(f"{name}: not a snapshot file (bad magic)")
    version, hlen = struct.unpack_from("<BI", data, 5)
    if version != VERSION:
        raise SnapshotError(f"{name}: unsupported snapshot version {version}")
    start = 10
    if len(data) < start + hlen + 4:
        raise SnapshotError(f"{name}: truncated header")
    hb = data[start:start + hlen]
    (hcrc,) = struct.unpack_from("<I", data, start + hlen)
    if zlib.crc32(hb) != hcrc:
        raise SnapshotError(f"{name}: header checksum mismatch")
    header = json.loads(hb.decode("utf-8"))
    payload = data[start + hlen + 4:]
    n = int(header["n"])
    expected = sum(c for _, c in header["fields"]) * n**3 * 8
    if len(payload) != expected:
        raise SnapshotError(f"{name}: payload has {len(payload)} bytes, expected {expected}")
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise SnapshotError(f"{name}: payload checksum mismatch")
    arrays = {}
    offset = 0
    for fname, comps in header["fields"]:
        count = comps * n**3
        flat = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        shape = (n, n, n) if comps == 1 else (comps, n, n, n)
        a = flat.reshape(shape)
        arrays[fname] = np.ascontiguousarray(a.transpose(*range(a.ndim - 3), -1, -2, -3)).astype(float)
        offset += count * 8
    return Snapshot(n, float(header["t"]), int(header["step"]), arrays, header.get("meta", {}))


def snapshot_name(step: int) -> str:
    return f"snap_{step:08d}{SUFFIX}"


def write_snapshot(directory, snap: Snapshot) -> Path:
    path = Path(directory) / snapshot_name(snap.step)
    path.write_bytes(encode(snap))
    return path


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise SnapshotError(f"{path}: cannot read snapshot ({exc.strerror})") from exc
    return decode(data, str(path))


def list_snapshots(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise SnapshotError(f"{directory}: snapshot directory not found")
    return sorted(directory.glob(f"snap_*{SUFFIX}"))
