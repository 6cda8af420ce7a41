"""Minimal PGM (portable graymap) reading and writing.

Masks are ingested from P2 (ASCII) or P5 (binary) files and normalized by
maxval to [0, 1].  Exports are P5 with 16-bit big-endian samples, which any
scientific viewer reads and which round-trips integer data exactly.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    pass


def read_pgm(path) -> np.ndarray:
    """Read a P2/P5 PGM file as float64 in [0, 1] (maxval-normalized)."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P2", b"P5"):
        raise PgmError(f"{path}: not a PGM file (magic {data[:2]!r})")
    magic = data[:2].decode()
    # header tokens: width height maxval, with '#' comments allowed
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", data[pos:])
        if m is None:
            raise PgmError(f"{path}: truncated PGM header")
        tok = m.group(1)
        pos += m.end()
        if not tok.startswith(b"#"):
            try:
                tokens.append(int(tok))
            except ValueError as e:
                raise PgmError(f"{path}: bad header token {tok!r}") from e
    width, height, maxval = tokens
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PgmError(f"{path}: bad PGM dimensions {width}x{height} maxval {maxval}")
    if magic == "P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        count = width * height
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        if raw.size != count:
            raise PgmError(f"{path}: truncated P5 payload")
        img = raw.reshape(height, width).astype(np.float64)
    else:
        vals = data[pos:].split()
        if len(vals) < width * height:
            raise PgmError(f"{path}: truncated P2 payload")
        img = np.array([int(v) for v in vals[: width * height]], dtype=np.float64)
        img = img.reshape(height, width)
    return img / maxval


def write_pgm16(path, values: np.ndarray) -> None:
    """Write a 2-D array as 16-bit P5, min-max scaled to [0, 65535].

    NaNs are written as 0.  A constant array maps to mid-scale.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise PgmError(f"expected 2-D array, got shape {v.shape}")
    finite = np.isfinite(v)
    if finite.any():
        lo = v[finite].min()
        hi = v[finite].max()
    else:
        lo, hi = 0.0, 0.0
    if hi > lo:
        scaled = (v - lo) / (hi - lo) * 65535.0
    else:
        scaled = np.full_like(v, 32767.0)
    scaled[~finite] = 0.0
    out = scaled.round().astype(">u2")
    ny, nx = v.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{nx} {ny}\n65535\n".encode())
        f.write(out.tobytes())
