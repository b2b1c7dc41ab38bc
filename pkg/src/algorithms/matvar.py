"""
Matrix-variate adapter.

Each subject is an l x m matrix (rows = time points, columns = spatial
locations). Vectorization stacks the l measurements of location 1, then
location 2, and so on, so a block of c consecutive locations covers l*c
consecutive entries of the vector.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from algorithms.bilt_test import DEFAULT_KERNEL, BiltResult, KernelSpec, bilt
from algorithms.blockstats import BlockPartition, TwoSampleData
from algorithms.errors import ShapeMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatrixLayout:
    rows: int
    cols: int
    cols_per_block: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.cols_per_block < 1:
            raise ValueError(f"layout dimensions must be positive, got {self}")
        if self.cols_per_block > self.cols:
            raise ValueError(f"cols_per_block={self.cols_per_block} exceeds cols={self.cols}")

    @property
    def p(self) -> int:
        return self.rows * self.cols

    @property
    def block_size(self) -> int:
        return self.rows * self.cols_per_block

    def truncated(self, keep_cols: int) -> "MatrixLayout":
        if not 1 <= keep_cols <= self.cols:
            raise ValueError(f"cannot keep {keep_cols} of {self.cols} columns")
        return MatrixLayout(self.rows, keep_cols, self.cols_per_block)


def _stack(sample: Sequence[np.ndarray], shape: Optional[tuple] = None) -> np.ndarray:
    mats = [np.asarray(m, dtype=float) for m in sample]
    if not mats:
        raise ShapeMismatch("sample is empty")
    shape = shape or mats[0].shape
    if len(shape) != 2:
        raise ShapeMismatch(f"observations must be matrices, got shape {shape}")
    for i, mat in enumerate(mats):
        if mat.shape != tuple(shape):
            raise ShapeMismatch(f"observation {i} has shape {mat.shape}, expected {tuple(shape)}")
    return np.stack(mats)


def vectorize(sample: Sequence[np.ndarray]) -> np.ndarray:
    """n x (l*m) matrix; entry (t, j) of a subject lands at column j*l + t."""
    cube = _stack(sample)
    n, rows, cols = cube.shape
    return cube.transpose(0, 2, 1).reshape(n, rows * cols)


def devectorize(vectors: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of vectorize: n x l x m array."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[1] != rows * cols:
        raise ShapeMismatch(f"expected n x {rows * cols} vectors, got {vectors.shape}")
    return vectors.reshape(vectors.shape[0], cols, rows).transpose(0, 2, 1)


def layout_partition(layout: MatrixLayout) -> BlockPartition:
    """Blocks of c consecutive locations; a short final block when c does not divide m."""
    full, rest = divmod(layout.cols, layout.cols_per_block)
    sizes = [layout.block_size] * full
    if rest:
        logger.warning(
            "%d columns are not divisible by %d columns per block; last block covers %d columns",
            layout.cols,
            layout.cols_per_block,
            rest,
        )
        sizes.append(layout.rows * rest)
    return BlockPartition(tuple(sizes))


def matrix_two_sample_test(
    group1: Sequence[np.ndarray],
    group2: Sequence[np.ndarray],
    layout: MatrixLayout,
    spec: KernelSpec = DEFAULT_KERNEL,
    level: float = 0.05,
) -> BiltResult:
    """vectorize -> layout_partition -> bilt."""
    shape = (layout.rows, layout.cols)
    x = vectorize(_stack(group1, shape))
    y = vectorize(_stack(group2, shape))
    return bilt(TwoSampleData(x, y), layout_partition(layout), spec, level)
