"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per workload with the best-of-N wall time for each backend
and the speedup.  Both backends must return identical results; a mismatch
aborts the run.
"""

from __future__ import annotations

import argparse
import random
import time

from qpa import kernels


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def workloads():
    rng = random.Random(0)
    yield "sums: 10^3 ones", "sums", ([1] * 1000,)
    yield "sums: 3*10^3 ones", "sums", ([1] * 3000,)
    mixed = [rng.choice([-1, 1]) * rng.randint(1, 50) for _ in range(200)]
    yield "sums: 200 mixed in [-50, 50]", "sums", (mixed,)
    for n in (12, 16, 20):
        deltas = [rng.randint(-30, 30) for _ in range(n)]
        t = [rng.randint(1, 3) for _ in range(n)]
        f = [rng.randint(1, 3) for _ in range(n)]
        yield f"gray: {n} branches", "gray", (deltas, t, f, 100, 4)


def run(repeat: int) -> None:
    if "cython" not in kernels.available_backends():
        print("compiled kernels are not built; only the Python backend is available")
        return
    print(f"{'workload':32} {'cython (s)':>12} {'python (s)':>12} {'speedup':>9}")
    for name, kind, args in workloads():
        fn = kernels.submultiset_sums if kind == "sums" else kernels.gray_accumulate
        tc, rc = best_of(lambda: fn(*args, backend="cython"), repeat)
        tp, rp = best_of(lambda: fn(*args, backend="python"), 1 if kind == "gray" else repeat)
        if rc != rp:
            raise SystemExit(f"backends disagree on {name}")
        print(f"{name:32} {tc:12.4f} {tp:12.4f} {tp / tc:8.1f}x")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    run(ap.parse_args().repeat)


if __name__ == "__main__":
    main()
