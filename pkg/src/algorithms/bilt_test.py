"""
Block independent likelihood ratio test.

T = sum_k U_{N,k} is centred by its exact null mean sum_k N D_{p_k}(N-2)
and scaled by a kernel (HAC) estimate of the long-run variance of the
U sequence:
    tau^2 = -2 N^2 mean_k D'_{p_k}(N-2) + 2 sum_{l=1}^{L} w(l/L) gamma(l).
The test rejects when |Z| >= z_{level/2}. With unit blocks it is the
diagonal likelihood ratio test.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, special

from algorithms.blockstats import (
    BlockPartition,
    TwoSampleData,
    block_statistics_array,
    fixed_partition,
)
from algorithms.errors import InsufficientSampleSize, LagTooLarge, NotPositiveDefinite
from algorithms.specfun import d_s, d_s_prime

logger = logging.getLogger(__name__)

# floor for tau^2, as a fraction of the parametric variance term
VARIANCE_GUARD_FRACTION = 0.05


class KernelKind(str, Enum):
    PARZEN = "parzen"
    TRUNCATED = "truncated"
    QUADRATIC_SPECTRAL = "qs"
    BARTLETT = "bartlett"

    @classmethod
    def parse(cls, name: str) -> "KernelKind":
        aliases = {
            "parzen": cls.PARZEN,
            "truncated": cls.TRUNCATED,
            "qs": cls.QUADRATIC_SPECTRAL,
            "quadratic_spectral": cls.QUADRATIC_SPECTRAL,
            "quadraticspectral": cls.QUADRATIC_SPECTRAL,
            "bartlett": cls.BARTLETT,
        }
        key = str(name).strip().lower().replace("-", "_")
        if key not in aliases:
            raise ValueError(f"unknown kernel {name!r}, expected one of {sorted(aliases)}")
        return aliases[key]


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.PARZEN
    bandwidth: int = 5

    def __post_init__(self):
        if not isinstance(self.kind, KernelKind):
            object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 1:
            raise ValueError(f"bandwidth must be a positive integer, got {self.bandwidth}")
        object.__setattr__(self, "bandwidth", int(self.bandwidth))


DEFAULT_KERNEL = KernelSpec(KernelKind.PARZEN, 5)


@dataclass(frozen=True)
class BiltResult:
    t_bilt: float
    k: int
    centering: float
    tau_sq_hat: float
    z: float
    p_value: float
    reject: bool
    level: float
    variance_guarded: bool = False
    block_sizes: Tuple[int, ...] = field(default=(), repr=False)

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["block_sizes"] = list(self.block_sizes)
        return out


def normal_sf(x):
    return special.ndtr(-np.asarray(x, dtype=float))


def normal_quantile(q):
    return special.ndtri(q)


def two_sided_p_value(z: float) -> float:
    return float(min(1.0, 2.0 * normal_sf(abs(z))))


def one_sided_p_value(z: float) -> float:
    return float(normal_sf(z))


def kernel_weight(spec: KernelSpec, ratio: float) -> float:
    """Lag-window weight w(x) at x = l / L."""
    x = abs(float(ratio))
    kind = spec.kind
    if kind is KernelKind.TRUNCATED:
        return 1.0 if x <= 1.0 else 0.0
    if kind is KernelKind.PARZEN:
        if x <= 0.5:
            return 1.0 - 6.0 * x**2 + 6.0 * x**3
        if x <= 1.0:
            return 2.0 * (1.0 - x) ** 3
        return 0.0
    if kind is KernelKind.BARTLETT:
        return 1.0 - x if x <= 1.0 else 0.0
    # quadratic spectral
    if x == 0.0:
        return 1.0
    arg = 6.0 * math.pi * x / 5.0
    return 25.0 / (12.0 * math.pi**2 * x**2) * (math.sin(arg) / arg - math.cos(arg))


def lag_covariance(u: Sequence[float], lag: int) -> float:
    """Sample lag covariance with divisor K - lag around the grand mean."""
    values = np.asarray(u, dtype=float)
    k = values.size
    if lag < 0 or lag >= k:
        raise LagTooLarge(f"lag {lag} needs at least {lag + 1} values, got K={k}")
    dev = values - values.mean()
    return float(dev[: k - lag] @ dev[lag:] / (k - lag))


def exact_block_moments(block_sizes: Sequence[int], n_total: int) -> Tuple[np.ndarray, np.ndarray]:
    """Exact null mean and variance of every U_{N,k}."""
    sizes = np.asarray(block_sizes, dtype=float)
    means = n_total * np.asarray(d_s(sizes, n_total - 2), dtype=float)
    variances = -2.0 * n_total**2 * np.asarray(d_s_prime(sizes, n_total - 2), dtype=float)
    return np.atleast_1d(means), np.atleast_1d(variances)


def _parametric_variance(block_sizes: Sequence[int], n_total: int) -> float:
    _, variances = exact_block_moments(block_sizes, n_total)
    return float(variances.mean())


def _estimate_tau_sq(u, block_sizes, n_total: int, spec: KernelSpec) -> Tuple[float, bool]:
    values = np.asarray(u, dtype=float)
    k = values.size
    if n_total < max(block_sizes) + 3:
        raise InsufficientSampleSize(f"N={n_total} is below largest block size + 3")

    base = _parametric_variance(block_sizes, n_total)
    max_lag = min(spec.bandwidth, k - 1)
    if max_lag < spec.bandwidth:
        logger.debug("bandwidth %d truncated to K-1=%d", spec.bandwidth, max_lag)

    lagged = 0.0
    for lag in range(1, max_lag + 1):
        weight = kernel_weight(spec, lag / spec.bandwidth)
        if weight != 0.0:
            lagged += weight * lag_covariance(values, lag)

    tau_sq = base + 2.0 * lagged
    floor = VARIANCE_GUARD_FRACTION * base
    if tau_sq < floor:
        logger.warning("long-run variance estimate %.4g below guard, floored at %.4g", tau_sq, floor)
        return floor, True
    return tau_sq, False


def estimate_tau_sq(u: Sequence[float], block_sizes: Sequence[int], n_total: int, spec: KernelSpec = DEFAULT_KERNEL) -> float:
    """Kernel estimate of the long-run variance of the U sequence, floored at a positive guard."""
    if len(u) < 2:
        raise LagTooLarge("long-run variance needs at least two blocks")
    tau_sq, _ = _estimate_tau_sq(u, block_sizes, n_total, spec)
    return tau_sq


def _standardize(u: np.ndarray, partition: BlockPartition, n_total: int, spec: KernelSpec, level: float) -> BiltResult:
    means, _ = exact_block_moments(partition.sizes, n_total)
    t_bilt = float(u.sum())
    centering = float(means.sum())
    tau_sq, guarded = _estimate_tau_sq(u, partition.sizes, n_total, spec)
    z = (t_bilt - centering) / math.sqrt(partition.k * tau_sq)
    p_value = two_sided_p_value(z)
    return BiltResult(
        t_bilt=t_bilt,
        k=partition.k,
        centering=centering,
        tau_sq_hat=tau_sq,
        z=z,
        p_value=p_value,
        reject=p_value <= level,
        level=level,
        variance_guarded=guarded,
        block_sizes=partition.sizes,
    )


def bilt(
    data: TwoSampleData,
    partition: BlockPartition,
    spec: KernelSpec = DEFAULT_KERNEL,
    level: float = 0.05,
) -> BiltResult:
    """Run the block independent likelihood ratio test."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    partition.check_against(data.p)
    if data.n_total < partition.max_size + 3:
        raise InsufficientSampleSize(
            f"N={data.n_total} is below largest block size + 3 = {partition.max_size + 3}"
        )
    _, u = block_statistics_array(data, partition)
    return _standardize(u, partition, data.n_total, spec, level)


def dlrt(data: TwoSampleData, spec: KernelSpec = DEFAULT_KERNEL, level: float = 0.05) -> BiltResult:
    """Diagonal likelihood ratio test, i.e. unit blocks."""
    return bilt(data, fixed_partition(data.p, 1), spec, level)


def block_noncentrality(delta: Sequence[float], sigma: np.ndarray, partition: BlockPartition) -> np.ndarray:
    """Delta_k = delta_k' Sigma_kk^{-1} delta_k for every block."""
    vec = np.asarray(delta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    partition.check_against(vec.size)
    out = np.empty(partition.k)
    for idx, (start, stop) in enumerate(partition.bounds()):
        try:
            factor = linalg.cho_factor(sigma[start:stop, start:stop], lower=True)
        except linalg.LinAlgError:
            raise NotPositiveDefinite(f"diagonal block {idx} of sigma is not positive definite") from None
        piece = vec[start:stop]
        out[idx] = float(piece @ linalg.cho_solve(factor, piece))
    return out


def theoretical_power(delta_quad: Sequence[float], k: int, tau: float, level: float = 0.05) -> float:
    """Asymptotic one-sided power 1 - Phi(z_level - (Delta'Delta / sqrt(K)) / tau)."""
    deltas = np.asarray(delta_quad, dtype=float)
    if np.any(deltas < 0):
        raise ValueError("block noncentralities must be nonnegative")
    if k < 1:
        raise ValueError(f"K must be a positive number of blocks, got {k}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    shift = float(deltas @ deltas) / math.sqrt(k) / tau
    return float(normal_sf(normal_quantile(1.0 - level) - shift))


def power_from_norm(delta_sq_norm: float, k: int, tau: float, level: float = 0.05) -> float:
    """theoretical_power when only Delta'Delta is known."""
    if delta_sq_norm < 0:
        raise ValueError("Delta'Delta must be nonnegative")
    return theoretical_power([math.sqrt(delta_sq_norm)], k, tau, level)


def standardize_block_values(
    u: Sequence[float],
    partition: BlockPartition,
    n_total: int,
    spec: KernelSpec = DEFAULT_KERNEL,
    level: float = 0.05,
) -> BiltResult:
    """Z statistic from precomputed U values, for callers that already hold them."""
    values = np.asarray(u, dtype=float)
    if values.size != partition.k:
        raise ValueError(f"expected {partition.k} block values, got {values.size}")
    return _standardize(values, partition, n_total, spec, level)


def describe(result: BiltResult, method: Optional[str] = None) -> Dict:
    """JSON-ready summary with the public field names."""
    out = {
        "statistic": result.t_bilt,
        "K": result.k,
        "centering": result.centering,
        "z": result.z,
        "tau_sq": result.tau_sq_hat,
        "p_value": result.p_value,
        "reject": result.reject,
        "level": result.level,
        "variance_guarded": result.variance_guarded,
    }
    if method:
        out = {"method": method, **out}
    return out
