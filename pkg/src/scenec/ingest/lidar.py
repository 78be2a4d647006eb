"""Binary LiDAR sweep format: 8-byte magic `TRVLID01`, then little-endian
records of 4 x float32 (x, y, z, label_id), label_id = -1 when unlabeled."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..errors import MissingFile, NonFinitePoint, TruncatedRecord
from ..taxonomy import CLASS_NAMES_20
from .types import LidarSweep

log = logging.getLogger(__name__)

MAGIC = b"TRVLID01"
RECORD_BYTES = 16


def parse_lidar(file) -> LidarSweep:
    path = Path(file)
    if not path.is_file():
        raise MissingFile(str(path))
    return parse_lidar_bytes(path.read_bytes(), name=str(path))


def parse_lidar_bytes(data: bytes, name: str = "<bytes>") -> LidarSweep:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise TruncatedRecord(f"{name}: bad or missing magic header")
    body = data[len(MAGIC):]
    if len(body) % RECORD_BYTES != 0:
        raise TruncatedRecord(
            f"{name}: payload of {len(body)} bytes is not a multiple of {RECORD_BYTES}"
        )
    if len(body) == 0:
        raise TruncatedRecord(f"{name}: empty sweep")
    raw = np.frombuffer(body, dtype="<f4").reshape(-1, 4)
    points = raw[:, :3].astype(np.float64)
    if not np.all(np.isfinite(points)):
        bad = int(np.flatnonzero(~np.isfinite(points).all(axis=1))[0])
        raise NonFinitePoint(f"{name}: non-finite coordinate at record {bad}")
    labels = np.where(np.isfinite(raw[:, 3]), np.rint(raw[:, 3]), -1.0).astype(np.int16)
    out_of_range = (labels < -1) | (labels >= len(CLASS_NAMES_20))
    if np.any(out_of_range):
        log.warning("%s: %d label(s) outside taxonomy mapped to void",
                    name, int(np.count_nonzero(out_of_range)))
        labels = labels.copy()
        labels[out_of_range] = CLASS_NAMES_20.index("void")
    return LidarSweep(points=points, labels=labels)


def write_lidar(file, sweep: LidarSweep) -> None:
    """Inverse of parse_lidar; used for fixtures and round-trip checks."""
    raw = np.empty((len(sweep), 4), dtype="<f4")
    raw[:, :3] = sweep.points
    raw[:, 3] = sweep.labels
    Path(file).write_bytes(MAGIC + raw.tobytes())
