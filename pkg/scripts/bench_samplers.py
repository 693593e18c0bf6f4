"""Quick check of ICDF vs Gumbel edge sampling cost.
Run this from the project root: python scripts/bench_samplers.py
"""
import os
import sys

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, PROJECT_ROOT)

from src.cli.bench import bench_samplers, draw_ratio  # noqa: E402

print("Benchmarking edge samplers...")
print("=" * 40)

frame = bench_samplers(sizes=(100_000, 1_000_000), repeats=3)
print(frame.to_string(index=False))

ratio = draw_ratio(frame)
icdf = frame[(frame["sampler"] == "icdf") & (frame["size"] == 1_000_000)]["seconds"].iloc[0]
gumbel = frame[(frame["sampler"] == "gumbel") & (frame["size"] == 1_000_000)]["seconds"].iloc[0]

print("\n" + "=" * 40)
print(f"Draws per sample, Gumbel / ICDF: {ratio:g}")
print(f"Wall clock per 10^6 samples: ICDF {icdf:.4f}s, Gumbel {gumbel:.4f}s")
if icdf > gumbel:
    print("ICDF was slower on this machine; rerun with the machine otherwise idle.")
