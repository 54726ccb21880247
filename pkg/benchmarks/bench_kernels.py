"""Time the coupling-matrix fill for each available backend and check they agree.

    python benchmarks/bench_kernels.py [--sizes 100 625 1080] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from colddipole import _backend
from colddipole.core import EnsembleConfig, sample_atoms


def best_of(fill, pos, out, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fill(pos, out)
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 625, 1080])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = _backend.backends()
    print(f"default backend: {_backend.BACKEND}; available: {', '.join(backends)}")
    print(f"{'N':>6} " + " ".join(f"{name + ' [s]':>12}" for name in backends) + f" {'speedup':>8} {'max rel diff':>13}")
    for n in args.sizes:
        pos = np.ascontiguousarray(sample_atoms(EnsembleConfig(n, seed=1), 0).positions)
        outs, times = {}, {}
        for name, fill in backends.items():
            out = np.empty((3 * n, 3 * n), dtype=complex)
            times[name] = best_of(fill, pos, out, args.repeat)
            outs[name] = out
        ref = outs["python"]
        diff = max(float(np.max(np.abs(o - ref)) / np.max(np.abs(ref))) for o in outs.values())
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{n:>6} " + " ".join(f"{times[name]:>12.4f}" for name in backends) + f" {speedup:>8.1f} {diff:>13.1e}")


if __name__ == "__main__":
    main()
