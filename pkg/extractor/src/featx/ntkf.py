"""Writer for the NTKF feature container.

This is the extractor's half of the cross-component contract; the
clustering engine ships the reader.  Layout, little-endian throughout:

    bytes 0-3    magic b"NTKF"
    byte  4      version = 1
    bytes 5-8    reserved, zero
    bytes 9-16   u64 row count M
    bytes 17-24  u64 column count d
    remainder    M*d float32 values, row-major

Writes are atomic (temp file + rename) so a crashed run never leaves a
half-written feature file behind.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NTKF"
VERSION = 1

_HEADER = struct.Struct("<4sB4xQQ")


def write_matrix(mat: np.ndarray, path: str | Path) -> None:
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    rows, cols = mat.shape
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
