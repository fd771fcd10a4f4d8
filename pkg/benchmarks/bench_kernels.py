"""Benchmark the compiled kernels against the pure numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]

Covers the three hot paths: direct log-domain convolution, exact
canonical sampling, and the event-driven dynamics loop.  Both backends
consume identical rng streams, so the checksum column doubles as a
cross-backend agreement check.
"""

import argparse
import time

import numpy as np

from zrplab._kernels import get_backend
from zrplab.canonical import build_suffix_tables
from zrplab.dynamics import jump_rate_table
from zrplab.ensemble import truncated_site_law


def timed(fn, repeat):
    best = float("inf")
    value = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def bench_convolve(backend, size, repeat):
    law = truncated_site_law(2.5, size)
    p = law.log_masses

    def run():
        out = backend.convolve_log(p, p, size)
        return float(out[size])

    return timed(run, repeat)


def bench_sampler(backend, n_samples, repeat):
    tables = build_suffix_tables(2.5, 400, 64)

    def run():
        gen = np.random.Generator(np.random.Philox(1234))
        out = backend.sample_canonical_batch(tables.log_weights, tables.partial, n_samples, gen)
        return int(out.sum())

    return timed(run, repeat)


def bench_ctmc(backend, n_events, repeat):
    g_table = jump_rate_table(2.0, 200)

    def run():
        gen = np.random.Generator(np.random.Philox(99))
        occ = np.full(50, 4, dtype=np.int64)
        out = backend.ctmc_simulate(occ, g_table, gen, max_events=n_events)
        return float(out[1])

    return timed(run, repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = {}
    for name in ("compiled", "pure"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"{name} backend unavailable, skipping")
    cases = [
        ("convolve_log n=2000", bench_convolve, 2000),
        ("convolve_log n=6000", bench_convolve, 6000),
        ("canonical sampler x2000 (N=400, L=64)", bench_sampler, 2000),
        ("ctmc 200k events (N=200, L=50)", bench_ctmc, 200_000),
    ]
    print(f"{'case':45s} {'backend':9s} {'best':>10s} {'checksum':>18s}")
    for label, fn, size in cases:
        baseline = None
        for name, backend in backends.items():
            secs, value = fn(backend, size, args.repeat)
            speed = "" if name != "pure" or baseline is None else f"  ({secs / baseline:.1f}x vs compiled)"
            if name == "compiled":
                baseline = secs
            print(f"{label:45s} {name:9s} {secs * 1e3:9.2f}ms {value!r:>18s}{speed}")


if __name__ == "__main__":
    main()
