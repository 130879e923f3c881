"""
Frame codecs.
- PC4D: magic b"PC4D", u8 version (1), u8 flags (bit0 = RGB), u32 count,
  then per point 3 x f32 xyz (meters) [+ 3 x u8 rgb], little-endian
- ASCII PLY subset: vertex element with float x/y/z (other properties ignored)
"""

import struct
from pathlib import Path

import numpy as np

from volumetrack.exceptions import FrameFormatError
from volumetrack.models.volume import PointFrame

PC4D_MAGIC = b"PC4D"
PC4D_VERSION = 1
_HEADER = struct.Struct("<4sBBI")
_XYZ = np.dtype([("xyz", "<f4", (3,))])
_XYZRGB = np.dtype([("xyz", "<f4", (3,)), ("rgb", "u1", (3,))])


def encode_pc4d(frame: PointFrame) -> bytes:
    has_rgb = frame.colors is not None
    records = np.zeros(len(frame), dtype=_XYZRGB if has_rgb else _XYZ)
    records["xyz"] = frame.points.astype("<f4")
    if has_rgb:
        records["rgb"] = frame.colors
    return _HEADER.pack(PC4D_MAGIC, PC4D_VERSION, int(has_rgb), len(frame)) + records.tobytes()


def decode_pc4d(data: bytes, timestamp_index: int = 0) -> PointFrame:
    if len(data) < _HEADER.size:
        raise FrameFormatError("PC4D: truncated header")
    magic, version, flags, count = _HEADER.unpack_from(data)
    if magic != PC4D_MAGIC:
        raise FrameFormatError(f"PC4D: bad magic {magic!r}")
    if version != PC4D_VERSION:
        raise FrameFormatError(f"PC4D: unsupported version {version}")
    dtype = _XYZRGB if flags & 1 else _XYZ
    body = data[_HEADER.size:]
    if len(body) != count * dtype.itemsize:
        raise FrameFormatError(f"PC4D: expected {count} points, payload has {len(body)} bytes")
    records = np.frombuffer(body, dtype=dtype, count=count)
    points = records["xyz"].astype(np.float64)
    if not np.isfinite(points).all():
        raise FrameFormatError("PC4D: non-finite coordinates")
    colors = records["rgb"].copy() if flags & 1 else None
    return PointFrame(timestamp_index, points, colors)


def write_pc4d(path: Path, frame: PointFrame) -> None:
    Path(path).write_bytes(encode_pc4d(frame))


def read_pc4d(path: Path, timestamp_index: int = 0) -> PointFrame:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FrameFormatError(f"cannot read frame {path}: {e}") from e
    return decode_pc4d(data, timestamp_index)


def read_ascii_ply(path: Path, timestamp_index: int = 0) -> PointFrame:
    try:
        lines = Path(path).read_text().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise FrameFormatError(f"cannot read frame {path}: {e}") from e
    if not lines or lines[0].strip() != "ply":
        raise FrameFormatError(f"{path}: not a PLY file")
    vertex_count, props, in_vertex, header_end = 0, [], False, None
    try:
        for i, line in enumerate(lines[1:], start=1):
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "format" and tokens[1] != "ascii":
                raise FrameFormatError(f"{path}: only ascii PLY is supported")
            elif tokens[0] == "element":
                in_vertex = tokens[1] == "vertex"
                if in_vertex:
                    vertex_count = int(tokens[2])
            elif tokens[0] == "property" and in_vertex:
                props.append(tokens[-1])
            elif tokens[0] == "end_header":
                header_end = i
                break
    except (IndexError, ValueError) as e:
        raise FrameFormatError(f"{path}: bad header line {line!r}") from e
    if header_end is None or not {"x", "y", "z"} <= set(props):
        raise FrameFormatError(f"{path}: missing end_header or x/y/z properties")
    cols = [props.index(axis) for axis in ("x", "y", "z")]
    try:
        rows = [lines[header_end + 1 + k].split() for k in range(vertex_count)]
        points = np.array([[float(r[c]) for c in cols] for r in rows], dtype=np.float64).reshape(-1, 3)
    except (IndexError, ValueError) as e:
        raise FrameFormatError(f"{path}: bad vertex data ({e})") from e
    if not np.isfinite(points).all():
        raise FrameFormatError(f"{path}: non-finite coordinates")
    return PointFrame(timestamp_index, points)


def read_frame(path: Path, timestamp_index: int = 0) -> PointFrame:
    suffix = Path(path).suffix.lower()
    if suffix == ".pc4d":
        return read_pc4d(path, timestamp_index)
    if suffix == ".ply":
        return read_ascii_ply(path, timestamp_index)
    raise FrameFormatError(f"unknown frame format: {path}")
