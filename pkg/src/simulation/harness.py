"""
Monte Carlo engine for the numerical study.

Every replication draws from its own numpy Generator seeded by
SeedSequence(seed, spawn_key=(0, rep_index)); Sigma and a fixed mu2 use
the separate keys (1,) and (2,). Results are therefore a function of
(seed, config) only, whatever the parallelism.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from algorithms.bilt_test import bilt, normal_quantile
from algorithms.blockstats import BlockPartition, TwoSampleData
from algorithms.covgen import cholesky_factor, make_mu2, realize_sigma, sample_gaussian
from algorithms.errors import BiltError, InvalidConfig, ReplicationFailed
from simulation.config import SimulationConfig

logger = logging.getLogger(__name__)

_REPLICATION_KEY = 0
_SIGMA_KEY = 1
_FIXED_MU2_KEY = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def replication_rng(seed: int, rep_index: int) -> np.random.Generator:
    return stream(seed, _REPLICATION_KEY, rep_index)


@dataclass(frozen=True)
class PreparedConfig:
    """Immutable per-campaign state shared by every replication."""

    config: SimulationConfig
    sigma: np.ndarray = field(repr=False)
    chol: Optional[np.ndarray] = field(repr=False)
    partition: BlockPartition
    fixed_mu2: Optional[np.ndarray] = field(default=None, repr=False)


def prepare(config: SimulationConfig) -> PreparedConfig:
    sigma = realize_sigma(config.model, config.p, stream(config.seed, _SIGMA_KEY))
    chol = None if config.model.is_identity else cholesky_factor(sigma)
    fixed_mu2 = None
    if config.fix_mu2 or not config.signal.is_random:
        fixed_mu2 = make_mu2(config.signal, config.p, stream(config.seed, _FIXED_MU2_KEY))
    return PreparedConfig(config, sigma, chol, config.block_partition(), fixed_mu2)


@dataclass(frozen=True)
class SimulationReport:
    config: SimulationConfig
    rejections: int
    reps: int
    rejection_rate: float
    standard_error: float
    z_samples: Optional[Tuple[float, ...]] = field(default=None, repr=False)
    wall_time: float = 0.0
    error: str = ""

    def payload(self) -> Dict:
        """Everything except wall time; equal payloads mean equal results."""
        return {
            **self.config.to_row(),
            "rejections": self.rejections,
            "rejection_rate": self.rejection_rate,
            "se": self.standard_error,
            "z_samples": self.z_samples,
            "error": self.error,
        }

    def to_row(self) -> Dict:
        return {
            **self.config.to_row(),
            "rejection_rate": self.rejection_rate,
            "se": self.standard_error,
            "wall_time": self.wall_time,
            "error": self.error,
        }


def _simulate_once(prepared: PreparedConfig, rep_index: int) -> Tuple[float, bool]:
    config = prepared.config
    rng = replication_rng(config.seed, rep_index)
    if prepared.fixed_mu2 is not None:
        mu2 = prepared.fixed_mu2
    else:
        mu2 = make_mu2(config.signal, config.p, rng)
    x = sample_gaussian(np.zeros(config.p), prepared.chol, config.n1, rng)
    y = sample_gaussian(mu2, prepared.chol, config.n2, rng)
    result = bilt(TwoSampleData(x, y), prepared.partition, config.kernel, config.level)
    return result.z, result.reject


def run_replication(config: SimulationConfig, rep_index: int, prepared: Optional[PreparedConfig] = None) -> Dict:
    """One replication: {z, reject}, fully determined by (seed, rep_index)."""
    prepared = prepared or prepare(config)
    try:
        z, reject = _simulate_once(prepared, rep_index)
    except BiltError as exc:
        raise ReplicationFailed(str(exc), rep_index) from exc
    return {"z": z, "reject": reject}


def _guarded(prepared: PreparedConfig, rep_index: int) -> Tuple[int, float, bool, str]:
    try:
        z, reject = _simulate_once(prepared, rep_index)
    except BiltError as exc:
        return rep_index, math.nan, False, str(exc)
    return rep_index, z, reject, ""


def run_campaign(config: SimulationConfig, parallelism: int = 1) -> SimulationReport:
    """All replications of one config; identical output for any parallelism."""
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    start = time.perf_counter()
    prepared = prepare(config)
    logger.debug("campaign %s %s p=%d b=%s reps=%d", config.experiment, config.model.label, config.p,
                 config.block_size, config.reps)

    if parallelism == 1:
        outcomes = [_guarded(prepared, i) for i in range(config.reps)]
    else:
        outcomes = Parallel(n_jobs=parallelism, prefer="threads")(
            delayed(_guarded)(prepared, i) for i in range(config.reps)
        )

    failures = [(i, msg) for i, _, _, msg in outcomes if msg]
    if failures:
        first_index, first_msg = failures[0]
        raise ReplicationFailed(f"{len(failures)} of {config.reps} replications failed; first: {first_msg}",
                                first_index)

    rejections = sum(1 for _, _, reject, _ in outcomes if reject)
    rate = rejections / config.reps
    se = math.sqrt(rate * (1.0 - rate) / config.reps)
    z_samples = tuple(z for _, z, _, _ in outcomes) if config.keep_z else None
    return SimulationReport(
        config=config,
        rejections=rejections,
        reps=config.reps,
        rejection_rate=rate,
        standard_error=se,
        z_samples=z_samples,
        wall_time=time.perf_counter() - start,
    )


def sweep(configs: Sequence[SimulationConfig], parallelism: int = 1) -> List[SimulationReport]:
    """One report per config in order; a failing config yields an error row instead of aborting."""
    if not configs:
        raise ValueError("sweep needs at least one config")
    reports = []
    for i, config in enumerate(configs):
        try:
            reports.append(run_campaign(config, parallelism))
        except BiltError as exc:
            logger.warning("config %d (%s) failed: %s", i, config.experiment, exc)
            reports.append(
                SimulationReport(config, 0, config.reps, math.nan, math.nan, error=str(exc))
            )
        else:
            report = reports[-1]
            logger.info("[%d/%d] %s %s p=%d b=%s delta=%g prop=%g -> %.4f (se %.4f)", i + 1, len(configs),
                        config.experiment, config.model.label, config.p, config.block_size,
                        config.signal.delta, config.signal.prop, report.rejection_rate, report.standard_error)
    return reports


def null_distribution_sample(config: SimulationConfig, reps: Optional[int] = None, parallelism: int = 1) -> List[float]:
    """Standardized statistics of `reps` null replications."""
    if not config.signal.is_null:
        raise InvalidConfig("null distribution needs a null signal (delta = 0)", "delta")
    config = replace(config, reps=reps or config.reps, keep_z=True)
    return list(run_campaign(config, parallelism).z_samples)


def summarize_z(z: Sequence[float]) -> Dict[str, float]:
    """Mean, sd and Kolmogorov-Smirnov distance to N(0, 1)."""
    values = np.asarray(z, dtype=float)
    ks = stats.kstest(values, "norm")
    return {
        "n": int(values.size),
        "mean": float(values.mean()),
        "sd": float(values.std(ddof=1)) if values.size > 1 else math.nan,
        "ks_distance": float(ks.statistic),
        "ks_p_value": float(ks.pvalue),
    }


def one_sided_rejection_rate(z: Sequence[float], level: float) -> float:
    """Share of z at or above the upper level-quantile."""
    values = np.asarray(z, dtype=float)
    return float(np.mean(values >= normal_quantile(1.0 - level)))
