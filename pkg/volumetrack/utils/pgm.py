from pathlib import Path

import numpy as np


def write_pgm16(path: Path, image: np.ndarray, scale: float = 1.0) -> None:
    """Binary 16-bit PGM (big-endian samples). Stored value = round(image * scale); rows are map x."""
    data = np.clip(np.rint(np.asarray(image, dtype=np.float64) * scale), 0, 65535).astype(">u2")
    height, width = data.shape
    header = f"P5\n# scale={scale!r}\n{width} {height}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def read_pgm16(path: Path) -> tuple[np.ndarray, float]:
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    scale = 1.0
    pos = 0
    while len(fields) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end]
        pos = end + 1
        if line.startswith(b"#"):
            if line.startswith(b"# scale="):
                scale = float(line[len(b"# scale="):])
            continue
        fields.extend(line.split())
    width, height = int(fields[1]), int(fields[2])
    data = np.frombuffer(raw[pos:], dtype=">u2", count=width * height).reshape(height, width)
    return data.astype(np.int32), scale
