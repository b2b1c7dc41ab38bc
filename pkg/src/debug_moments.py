"""
Debug script to check the exact null moments of the block statistics
against a quick Monte Carlo run.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from algorithms.bilt_test import exact_block_moments
from algorithms.blockstats import TwoSampleData, block_statistic
from algorithms.covgen import sample_gaussian
from simulation.harness import replication_rng

def debug_moments(n1: int = 30, n2: int = 30, reps: int = 20000, seed: int = 7):
    """Exact versus simulated mean and variance of U_{N,k} per block size"""
    n_total = n1 + n2
    print("DEBUG: EXACT NULL MOMENTS OF U")
    print("=" * 60)
    print(f"n1={n1}, n2={n2}, reps={reps}, seed={seed}")
    print(f"{'b':>3} {'exact mean':>12} {'sim mean':>12} {'exact var':>12} {'sim var':>12}")

    for b in (1, 2, 5, 10):
        means, variances = exact_block_moments([b], n_total)
        values = np.empty(reps)
        for rep in range(reps):
            rng = replication_rng(seed, rep)
            x = sample_gaussian(np.zeros(b), None, n1, rng)
            y = sample_gaussian(np.zeros(b), None, n2, rng)
            values[rep] = block_statistic(TwoSampleData(x, y), (0, b)).u
        print(f"{b:>3} {means[0]:>12.5f} {values.mean():>12.5f} {variances[0]:>12.5f} {values.var(ddof=1):>12.5f}")

if __name__ == "__main__":
    debug_moments()
