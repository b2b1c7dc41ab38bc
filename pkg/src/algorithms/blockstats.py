"""
Two-sample data containers, block partitions and per-block statistics.

A block statistic is the Hotelling-type quadratic form of one block,
    A_k = (n1 n2 / N) d_k' S_k^{-1} d_k,
with d_k the block mean difference and S_k the pooled block covariance
(divisor N - 2), together with its log transform
    U_k = N log(1 + A_k / (N - 2)).
Quadratic forms are always evaluated through a Cholesky factor.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, stats

from algorithms.errors import (
    BiltError,
    DimensionTooLarge,
    InsufficientSampleSize,
    ShapeMismatch,
    SingularBlockCovariance,
)

# pivot <= PIVOT_TOLERANCE * max|diag(S_k)| counts as a failed factorization
PIVOT_TOLERANCE = 1e-12

BlockRange = Union[range, slice, Tuple[int, int]]


@dataclass(frozen=True)
class TwoSampleData:
    """Observations of the two groups, rows are subjects, columns variables."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 2:
            raise ShapeMismatch(f"both groups must be 2-d matrices, got shapes {x.shape} and {y.shape}")
        if x.shape[1] != y.shape[1]:
            raise ShapeMismatch(f"groups disagree on p: {x.shape[1]} vs {y.shape[1]}")
        if x.shape[0] < 2 or y.shape[0] < 2:
            raise InsufficientSampleSize(f"each group needs at least 2 rows, got n1={x.shape[0]}, n2={y.shape[0]}")
        if x.shape[1] < 1:
            raise ShapeMismatch("data must have at least one variable")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise BiltError("observations must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_arrays(cls, x, y) -> "TwoSampleData":
        return cls(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def n1(self) -> int:
        return self.x.shape[0]

    @property
    def n2(self) -> int:
        return self.y.shape[0]

    @property
    def n_total(self) -> int:
        return self.n1 + self.n2

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def swap(self) -> "TwoSampleData":
        """Same data with the group labels exchanged."""
        return TwoSampleData(self.y, self.x)

    def mean_difference(self) -> np.ndarray:
        return self.x.mean(axis=0) - self.y.mean(axis=0)


@dataclass(frozen=True)
class BlockPartition:
    """Ordered block sizes p_1..p_K covering the variables left to right."""

    sizes: Tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(self.sizes)
        if any(isinstance(s, bool) or float(s) != int(s) for s in sizes):
            raise ValueError(f"block sizes must be integers, got {sizes}")
        sizes = tuple(int(s) for s in sizes)
        if not sizes:
            raise ValueError("a partition needs at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        return cls(tuple(sizes))

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> int:
        return sum(self.sizes)

    @property
    def max_size(self) -> int:
        return max(self.sizes)

    def bounds(self) -> List[Tuple[int, int]]:
        """(start, stop) column index pairs, zero-based and half-open."""
        edges = np.concatenate(([0], np.cumsum(self.sizes)))
        return [(int(edges[i]), int(edges[i + 1])) for i in range(self.k)]

    def check_against(self, p: int) -> None:
        if self.p != p:
            raise ShapeMismatch(f"partition covers {self.p} variables but the data has p={p}")


@dataclass(frozen=True)
class BlockStat:
    a: float
    u: float
    block_size: int


def fixed_partition(p: int, b: int) -> BlockPartition:
    """floor(p/b) blocks of size b, plus a final remainder block when b does not divide p."""
    if p < 1 or b < 1:
        raise ValueError(f"p and b must be positive, got p={p}, b={b}")
    full, rest = divmod(p, b)
    sizes = [b] * full
    if rest:
        sizes.append(rest)
    return BlockPartition(tuple(sizes))


def _block_columns(block: BlockRange) -> slice:
    if isinstance(block, slice):
        return block
    if isinstance(block, range):
        if block.step != 1:
            raise ValueError("blocks must be contiguous")
        return slice(block.start, block.stop)
    start, stop = block
    return slice(int(start), int(stop))


def pooled_block_covariance(data: TwoSampleData, block: BlockRange) -> np.ndarray:
    """Pooled within-group covariance of the block columns, divisor N - 2."""
    cols = _block_columns(block)
    if data.n_total - 2 < 1:
        raise InsufficientSampleSize("pooled covariance needs N - 2 >= 1")
    xc = data.x[:, cols] - data.x[:, cols].mean(axis=0)
    yc = data.y[:, cols] - data.y[:, cols].mean(axis=0)
    scatter = xc.T @ xc + yc.T @ yc
    cov = scatter / (data.n_total - 2)
    return 0.5 * (cov + cov.T)


def _factor_or_raise(cov: np.ndarray, block_index=None) -> np.ndarray:
    """Lower Cholesky factor with the relative pivot check."""
    scale = np.max(np.abs(np.diag(cov))) if cov.size else 0.0
    if scale <= 0.0:
        raise SingularBlockCovariance("pooled covariance is zero (constant variables)", block_index)
    try:
        lower = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        raise SingularBlockCovariance("pooled covariance is not positive definite", block_index) from None
    if np.min(np.diag(lower)) ** 2 <= PIVOT_TOLERANCE * scale:
        raise SingularBlockCovariance("pooled covariance is numerically singular", block_index)
    return lower


def _u_from_a(a, n_total: int):
    return n_total * np.log1p(a / (n_total - 2))


def block_statistic(data: TwoSampleData, block: BlockRange, block_index=None) -> BlockStat:
    """A_{N,k} and U_{N,k} of one block."""
    cols = _block_columns(block)
    b = len(range(*cols.indices(data.p)))
    if data.n_total < b + 3:
        raise InsufficientSampleSize(f"N={data.n_total} is below block size + 3 = {b + 3}")

    lower = _factor_or_raise(pooled_block_covariance(data, cols), block_index)
    diff = data.mean_difference()[cols]
    whitened = linalg.solve_triangular(lower, diff, lower=True)
    a = data.n1 * data.n2 / data.n_total * float(whitened @ whitened)
    return BlockStat(a=a, u=float(_u_from_a(a, data.n_total)), block_size=b)


def _forward_substitute(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve lower[k] @ w[k] = rhs[k] for a stack of lower-triangular factors."""
    out = np.empty_like(rhs)
    for i in range(rhs.shape[1]):
        known = np.einsum("kj,kj->k", lower[:, i, :i], out[:, :i])
        out[:, i] = (rhs[:, i] - known) / lower[:, i, i]
    return out


def block_statistics_array(data: TwoSampleData, partition: BlockPartition) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized A and U for every block, in partition order.

    Blocks of equal size are stacked and factorized together with the
    batched numpy Cholesky; a failing batch is re-run block by block so
    the offending block index can be reported.
    """
    partition.check_against(data.p)
    n_total = data.n_total
    if n_total < partition.max_size + 3:
        raise InsufficientSampleSize(f"N={n_total} is below largest block size + 3 = {partition.max_size + 3}")

    xc = data.x - data.x.mean(axis=0)
    yc = data.y - data.y.mean(axis=0)
    diff = data.mean_difference()
    scale = data.n1 * data.n2 / n_total

    a = np.empty(partition.k)
    bounds = partition.bounds()
    by_size: Dict[int, List[int]] = {}
    for idx, size in enumerate(partition.sizes):
        by_size.setdefault(size, []).append(idx)

    for size, indices in by_size.items():
        starts = np.array([bounds[i][0] for i in indices])
        cols = starts[:, None] + np.arange(size)[None, :]
        xb = xc[:, cols]
        yb = yc[:, cols]
        covs = (np.einsum("nki,nkj->kij", xb, xb) + np.einsum("nki,nkj->kij", yb, yb)) / (n_total - 2)
        d = diff[cols]
        try:
            lower = np.linalg.cholesky(covs)
        except np.linalg.LinAlgError:
            for i in indices:
                _factor_or_raise(pooled_block_covariance(data, bounds[i]), i)
            raise SingularBlockCovariance("pooled covariance is not positive definite", indices[0]) from None
        diag_max = np.max(np.abs(np.diagonal(covs, axis1=1, axis2=2)), axis=1)
        pivots = np.min(np.diagonal(lower, axis1=1, axis2=2), axis=1) ** 2
        bad = np.nonzero(pivots <= PIVOT_TOLERANCE * diag_max)[0]
        if bad.size:
            raise SingularBlockCovariance("pooled covariance is numerically singular", indices[int(bad[0])])
        whitened = _forward_substitute(lower, d)
        a[indices] = scale * np.einsum("ki,ki->k", whitened, whitened)

    return a, _u_from_a(a, n_total)


def all_block_statistics(data: TwoSampleData, partition: BlockPartition) -> List[BlockStat]:
    a, u = block_statistics_array(data, partition)
    return [BlockStat(a=float(a[k]), u=float(u[k]), block_size=size) for k, size in enumerate(partition.sizes)]


def hotelling_t2(data: TwoSampleData) -> Dict[str, float]:
    """Classical Hotelling T^2 with its exact F reference law."""
    n_total, p = data.n_total, data.p
    if p > n_total - 2:
        raise DimensionTooLarge(
            f"p={p} exceeds N-2={n_total - 2}: the pooled sample covariance matrix is singular"
        )
    if n_total - p - 1 < 1:
        raise DimensionTooLarge(f"F reference law needs N - p - 1 >= 1, got {n_total - p - 1}")

    cov = pooled_block_covariance(data, (0, p))
    lower = _factor_or_raise(cov)
    whitened = linalg.solve_triangular(lower, data.mean_difference(), lower=True)
    t2 = data.n1 * data.n2 / n_total * float(whitened @ whitened)

    df1, df2 = p, n_total - p - 1
    f_stat = t2 * df2 / ((n_total - 2) * p)
    p_value = float(stats.f.sf(f_stat, df1, df2))
    return {"t2": t2, "f_stat": f_stat, "df1": df1, "df2": df2, "p_value": p_value}
