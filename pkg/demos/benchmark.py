"""Cost of a ball synthesis plus analysis round trip as the band limit grows.

    python3 demos/benchmark.py
"""

from ballreg.experiment import bench

for method in ("direct", "fft"):
    meds, k = bench((8, 16, 32), runs=5, method=method)
    times = ", ".join(f"{t:.2e}" for t in meds)
    print(f"{method:>6}: median seconds {times}; fitted exponent {k:.2f}")
