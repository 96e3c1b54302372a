import json
import os
from typing import Dict, Iterable, List

import numpy as np

from src.models.errors import ArtifactFormatError
from src.models.world_state import PixelFrame


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_ppm(frame: PixelFrame, path: str):
    """Binary P6 dump of a rendered frame."""
    _ensure_parent(path)
    with open(path, "wb") as f:
        f.write(f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii"))
        f.write(frame.pixels)


def read_ppm(path: str) -> PixelFrame:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise ArtifactFormatError(f"{path} is not a P6 frame")
    width, height = (int(v) for v in parts[1].split())
    return PixelFrame(width=width, height=height, pixels=parts[3])


def frame_to_array(frame: PixelFrame) -> np.ndarray:
    return np.frombuffer(frame.pixels, dtype=np.uint8).reshape(frame.height, frame.width, 3)


def write_trace(records: Iterable[Dict], path: str):
    """One JSON object per step."""
    _ensure_parent(path)
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def read_trace(path: str) -> List[Dict]:
    with open(path, "r") as f:
        return [json.loads(line) for line in f if line.strip()]
