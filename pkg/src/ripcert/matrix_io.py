"""Binary and CSV serialization of sensing matrices.

Binary layout (all little-endian)::

    offset  size  field
    0       4     magic  b"RIPM"
    4       2     version (uint16, currently 1)
    6       1     scale tag (uint8: 0 raw, 1 one-over-sqrt-m)
    7       1     reserved (0)
    8       8     m (uint64)
    16      8     n (uint64)
    24      8     seed (uint64)
    32      8*m*n payload, row-major float64
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .sampling import SCALES, SensingMatrix

MAGIC = b"RIPM"
VERSION = 1
_HEADER = struct.Struct("<4sHBBQQQ")


def to_bytes(mat: SensingMatrix) -> bytes:
    m, n = mat.shape
    head = _HEADER.pack(MAGIC, VERSION, SCALES.index(mat.scale), 0, m, n, mat.seed)
    return head + np.ascontiguousarray(mat.data, dtype="<f8").tobytes()


def from_bytes(buf: bytes, model: str = "external") -> SensingMatrix:
    if len(buf) < _HEADER.size:
        raise DataError("truncated header")
    magic, version, tag, _, m, n, seed = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"unsupported format version {version}")
    if tag >= len(SCALES):
        raise DataError(f"unknown scale tag {tag}")
    expected = _HEADER.size + 8 * m * n
    if len(buf) != expected:
        raise DataError(f"payload size {len(buf) - _HEADER.size} does not match {m}x{n}")
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(m, n)
    return SensingMatrix(data.astype(np.float64), SCALES[tag], seed, model)


def save_bin(mat: SensingMatrix, path) -> None:
    Path(path).write_bytes(to_bytes(mat))


def load_bin(path) -> SensingMatrix:
    return from_bytes(Path(path).read_bytes())


def save_csv(mat: SensingMatrix, path) -> None:
    """Plain CSV, one matrix row per line, full float64 round-trip precision.

    The scale tag and seed go in a leading ``#`` comment line.
    """
    header = f"scale={mat.scale} seed={mat.seed} m={mat.shape[0]} n={mat.shape[1]}"
    np.savetxt(path, mat.data, delimiter=",", fmt="%.17g", header=header)


def load_csv(path) -> SensingMatrix:
    path = Path(path)
    scale, seed = "one-over-sqrt-m", 0
    with path.open() as fh:
        first = fh.readline()
    if first.startswith("#"):
        fields = dict(kv.split("=", 1) for kv in first[1:].split())
        scale = fields.get("scale", scale)
        seed = int(fields.get("seed", seed))
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return SensingMatrix(data, scale, seed)


def load_matrix(path) -> SensingMatrix:
    """Load by extension: ``.csv`` as CSV, anything else as binary."""
    if str(path).lower().endswith(".csv"):
        return load_csv(path)
    return load_bin(path)
