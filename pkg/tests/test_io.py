import struct

import numpy as np
import pytest

from volumetrack.exceptions import DataError, FrameFormatError
from volumetrack.models.volume import PointFrame
from volumetrack.utils.pointcloud_io import decode_pc4d, encode_pc4d, read_frame, write_pc4d


def test_pc4d_keeps_colors(tmp_path, rng):
    frame = PointFrame(3, rng.random((50, 3)), rng.integers(0, 256, (50, 3)))
    write_pc4d(tmp_path / "f.pc4d", frame)
    back = read_frame(tmp_path / "f.pc4d", timestamp_index=3)
    np.testing.assert_array_equal(back.points, frame.points.astype(np.float32))
    np.testing.assert_array_equal(back.colors, frame.colors)
    assert back.timestamp_index == 3


def test_pc4d_header_layout():
    data = encode_pc4d(PointFrame(0, np.zeros((2, 3))))
    assert data[:4] == b"PC4D"
    assert struct.unpack_from("<BBI", data, 4) == (1, 0, 2)
    assert len(data) == 10 + 2 * 12


@pytest.mark.parametrize(
    "data, message",
    [
        (b"PC4", "truncated"),
        (b"XXXX" + bytes(6), "magic"),
        (struct.pack("<4sBBI", b"PC4D", 9, 0, 0), "version"),
        (struct.pack("<4sBBI", b"PC4D", 1, 0, 2) + bytes(12), "expected 2 points"),
        (struct.pack("<4sBBI", b"PC4D", 1, 0, 1) + struct.pack("<3f", 0.0, float("nan"), 1.0), "non-finite"),
    ],
)
def test_pc4d_errors(data, message):
    with pytest.raises(FrameFormatError, match=message):
        decode_pc4d(data)


def test_ascii_ply(tmp_path):
    (tmp_path / "f.ply").write_text(
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float z\nproperty float x\nproperty float y\n"
        "property uchar red\nend_header\n1 2 3 255\n4 5 6 0\n"
    )
    frame = read_frame(tmp_path / "f.ply")
    np.testing.assert_array_equal(frame.points, [[2, 3, 1], [5, 6, 4]])


def test_ply_short_vertex_list(tmp_path):
    (tmp_path / "f.ply").write_text("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n")
    with pytest.raises(FrameFormatError, match="bad vertex data"):
        read_frame(tmp_path / "f.ply")


@pytest.mark.parametrize(
    "header",
    [
        "ply\nformat ascii 1.0\nelement vertex many\nproperty float x\nend_header\n",
        "ply\nformat\nelement vertex 1\nproperty float x\nend_header\n",
        "ply\nformat ascii 1.0\nelement\nend_header\n",
    ],
)
def test_ply_bad_header_lines(tmp_path, header):
    (tmp_path / "f.ply").write_text(header)
    with pytest.raises(FrameFormatError, match="bad header line"):
        read_frame(tmp_path / "f.ply")


def test_unreadable_frames_are_data_errors(tmp_path):
    with pytest.raises(DataError):
        read_frame(tmp_path / "absent.pc4d")
    (tmp_path / "f.xyz").write_text("")
    with pytest.raises(FrameFormatError, match="unknown frame format"):
        read_frame(tmp_path / "f.xyz")
