"""Memory pattern sets: normalization, Gaussian synthesis and IDX3 ingestion.

Patterns are stored column-wise, ``data[:, mu]`` is memory ``mu``, so the
matrix has shape ``(d, M)``.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from uhopplus.errors import (
    BadMagicError,
    DimensionMismatchError,
    EmptySelectionError,
    IndexOutOfRangeError,
    TruncatedFileError,
    ZeroVectorError,
)

NORM_ATOL = 1e-9
ZERO_NORM = 1e-12
IDX3_MAGIC = 2051


@dataclass(frozen=True)
class PatternSet:
    """Unit-norm memories as the columns of a ``(d, M)`` matrix."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionMismatchError(f"pattern matrix must be (d, M) with d, M >= 1, got {data.shape}")
        norms = np.linalg.norm(data, axis=0)
        if not np.allclose(norms, 1.0, rtol=0.0, atol=NORM_ATOL):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ZeroVectorError(f"column {worst} has norm {norms[worst]!r}, expected 1")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    def column(self, mu: int) -> np.ndarray:
        if not 0 <= mu < self.m:
            raise IndexOutOfRangeError(f"pattern index {mu} outside [0, {self.m})")
        return self.data[:, mu]

    def take(self, indices: Sequence[int]) -> "PatternSet":
        return PatternSet(self.data[:, list(indices)])

    def __len__(self) -> int:
        return self.m


def _unit_columns(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=0)
    bad = np.flatnonzero(norms < ZERO_NORM)
    if bad.size:
        raise ZeroVectorError(f"vector {int(bad[0])} has norm below {ZERO_NORM}")
    return mat / norms


def normalize_patterns(raw: Iterable[Sequence[float]]) -> PatternSet:
    """Scale each raw d-vector to unit length; order is preserved."""
    rows = [np.asarray(v, dtype=np.float64).ravel() for v in raw]
    if not rows:
        raise EmptySelectionError("no patterns given")
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise DimensionMismatchError(f"patterns have differing dimensions {sorted(dims)}")
    return PatternSet(_unit_columns(np.stack(rows, axis=1)))


def generate_synthetic(m: int, d: int, seed: int) -> PatternSet:
    """Draw ``m`` i.i.d. standard Gaussian d-vectors and normalize them.

    Uses numpy's PCG64 ``default_rng(seed)``; pattern ``mu`` consumes draws
    ``mu*d .. mu*d + d - 1`` of the stream, so a prefix of a larger set
    generated with the same seed is identical.
    """
    if m < 1 or d < 1:
        raise DimensionMismatchError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    return PatternSet(_unit_columns(rng.standard_normal((m, d)).T))


def gaussian_queries(n: int, d: int, seed: int) -> np.ndarray:
    """Unnormalized Gaussian queries, shape ``(n, d)``."""
    return np.random.default_rng(seed).standard_normal((n, d))


def _open(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx3(path, limit: Optional[int] = None) -> np.ndarray:
    """Raw IDX3 image bytes as a ``(n, rows*cols)`` uint8 array."""
    path = Path(path)
    with _open(path) as fh:
        header = fh.read(16)
        if len(header) < 4:
            raise TruncatedFileError(f"{path}: missing magic number")
        (magic,) = struct.unpack(">i", header[:4])
        if magic != IDX3_MAGIC:
            raise BadMagicError(f"{path}: magic {magic}, expected {IDX3_MAGIC} (IDX3 images)")
        if len(header) < 16:
            raise TruncatedFileError(f"{path}: header shorter than 16 bytes")
        count, rows, cols = struct.unpack(">iii", header[4:])
        n = count if limit is None else min(count, limit)
        size = rows * cols
        payload = fh.read(n * size)
    if len(payload) < n * size:
        raise TruncatedFileError(f"{path}: expected {n * size} pixel bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, size)


def load_idx(images_path, limit: Optional[int] = None) -> PatternSet:
    """Load IDX3 images as unit-norm patterns (pixels scaled by 1/255 first).

    All-zero images raise ``ZeroVectorError``; they are never dropped.
    """
    if limit is not None and limit <= 0:
        raise EmptySelectionError("limit must be positive")
    pixels = read_idx3(images_path, limit)
    if pixels.shape[0] == 0:
        raise EmptySelectionError(f"{images_path}: file holds no images")
    return PatternSet(_unit_columns(pixels.T.astype(np.float64) / 255.0))


def write_idx3(path, images: np.ndarray) -> None:
    """Write a ``(n, rows, cols)`` uint8 stack as IDX3. Used for fixtures."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">iiii", IDX3_MAGIC, n, rows, cols))
        fh.write(images.tobytes(order="C"))
