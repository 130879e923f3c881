"""
Model files, little-endian.
- VTLD: magic, u32 version, 51x51 f32 weights row-major, f32 bias, f32 delta
- VTLV: magic, u32 version, u32 input_len, input_len f32 weights, f32 bias
"""

import struct
from pathlib import Path

import numpy as np

from volumetrack.exceptions import ModelFormatError
from volumetrack.models.detection import DETECTOR_SIZE, LinearDetector

VTLD_MAGIC = b"VTLD"
VTLV_MAGIC = b"VTLV"
MODEL_VERSION = 1


def encode_detector(det: LinearDetector) -> bytes:
    return (
        VTLD_MAGIC
        + struct.pack("<I", MODEL_VERSION)
        + det.weights.astype("<f4").tobytes(order="C")
        + struct.pack("<ff", det.bias, det.delta)
    )


def decode_detector(data: bytes, nms_radius: int = 25) -> LinearDetector:
    n = DETECTOR_SIZE * DETECTOR_SIZE
    expected = 8 + 4 * n + 8
    if len(data) != expected or data[:4] != VTLD_MAGIC:
        raise ModelFormatError("not a VTLD detector model")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"VTLD: unsupported version {version}")
    weights = np.frombuffer(data, dtype="<f4", count=n, offset=8).reshape(DETECTOR_SIZE, DETECTOR_SIZE)
    bias, delta = struct.unpack_from("<ff", data, 8 + 4 * n)
    return LinearDetector(weights.astype(np.float64), float(bias), float(delta), nms_radius)


def encode_logistic(weights: np.ndarray, bias: float) -> bytes:
    w = np.asarray(weights, dtype="<f4").ravel()
    return VTLV_MAGIC + struct.pack("<II", MODEL_VERSION, len(w)) + w.tobytes() + struct.pack("<f", bias)


def decode_logistic(data: bytes) -> tuple[np.ndarray, float]:
    if len(data) < 12 or data[:4] != VTLV_MAGIC:
        raise ModelFormatError("not a VTLV verifier model")
    version, length = struct.unpack_from("<II", data, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"VTLV: unsupported version {version}")
    if len(data) != 12 + 4 * length + 4:
        raise ModelFormatError("VTLV: truncated model")
    weights = np.frombuffer(data, dtype="<f4", count=length, offset=12).astype(np.float64)
    (bias,) = struct.unpack_from("<f", data, 12 + 4 * length)
    return weights, float(bias)


def save_detector(path: Path, det: LinearDetector) -> None:
    Path(path).write_bytes(encode_detector(det))


def load_detector(path: Path, nms_radius: int = 25) -> LinearDetector:
    return decode_detector(Path(path).read_bytes(), nms_radius)


def save_logistic(path: Path, weights: np.ndarray, bias: float) -> None:
    Path(path).write_bytes(encode_logistic(weights, bias))


def load_logistic(path: Path) -> tuple[np.ndarray, float]:
    return decode_logistic(Path(path).read_bytes())
