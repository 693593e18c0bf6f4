"""Sampler micro-benchmark: wall clock and random draws per edge sample."""

import time

import numpy as np
import pandas as pd

from src.graphsampler.reference import ReferenceDistribution
from src.graphsampler.rng import DrawCounter, make_generator
from src.graphsampler.samplers import relaxed_samples

BENCH_COLUMNS = ("sampler", "size", "repeats", "draws", "draws_per_sample", "seconds", "seconds_per_million")
BENCH_THETA = 0.3
BENCH_TAU = 0.5


def bench_samplers(samplers=("icdf", "gumbel"), sizes=(1_000_000,), repeats=3, seed=0):
    """Best-of-``repeats`` timing per sampler and size, with exact draw counts.

    Returns:
        pandas.DataFrame with BENCH_COLUMNS
    """
    ref = ReferenceDistribution()
    rows = []
    for size in sizes:
        theta = np.full(size, BENCH_THETA)
        for sampler in samplers:
            counter = DrawCounter()
            best = float("inf")
            for r in range(repeats):
                rng = make_generator(seed, stream=r)
                start = time.perf_counter()
                relaxed_samples(sampler, theta, BENCH_TAU, ref, rng, counter=counter)
                best = min(best, time.perf_counter() - start)
            draws = counter.count // repeats
            rows.append({"sampler": sampler, "size": size, "repeats": repeats, "draws": draws,
                         "draws_per_sample": draws / size, "seconds": best,
                         "seconds_per_million": best * 1e6 / size})
    return pd.DataFrame(rows, columns=list(BENCH_COLUMNS))


def draw_ratio(frame, size=None):
    """Gumbel draws over ICDF draws for one size (the first when None)."""
    size = frame["size"].iloc[0] if size is None else size
    rows = frame[frame["size"] == size].set_index("sampler")
    return float(rows.loc["gumbel", "draws"] / rows.loc["icdf", "draws"])
