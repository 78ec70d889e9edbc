"""Compare the numba and numpy kernel backends.

Two measurements:

1. Kernel microbenchmarks: both implementations are loaded in-process
   through get_backend and timed on identical inputs (best of
   --repeats, after a warmup call so JIT compilation is not billed).
2. End-to-end study timing: the simulation pipeline binds its backend
   once at import time, so each backend runs in a subprocess with
   FDRLAB_BACKEND pinned, timing the standard 20k-replicate BH study.

Outputs agree bitwise between backends; the script asserts that before
printing any timing.

Usage: python benchmarks/bench_backends.py [--n 200] [--replicates 20000]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from fdrlab._backend import get_backend


def best_of(repeats, fn, *args):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def kernel_inputs(reps, n, seed=123):
    rng = np.random.default_rng(seed)
    p_sorted = np.sort(rng.uniform(size=(reps, n)), axis=1)
    unit = np.arange(1, n + 1) / n
    levels = np.full(reps, 0.05)
    crit = 0.05 * np.arange(1, n + 1) / (n + 1 - np.arange(1, n + 1) * 0.95)
    null_sorted = (rng.uniform(size=(reps, n)) < 0.8).astype(np.uint8)
    counts = rng.integers(0, n + 1, size=reps)
    return p_sorted, unit, levels, crit, null_sorted, counts


def bench_kernels(args):
    numpy_backend = get_backend("numpy")
    try:
        numba_backend = get_backend("numba")
    except ImportError:
        print("numba backend unavailable; kernel comparison skipped")
        return
    p_sorted, unit, levels, crit, null_sorted, counts = kernel_inputs(
        args.replicates, args.n
    )
    jobs = [
        ("step_up_counts", (p_sorted, unit, levels)),
        ("step_down_counts", (p_sorted, crit)),
        ("true_null_rejections", (null_sorted, counts)),
    ]
    print(f"kernels on {args.replicates} x {args.n} inputs "
          f"(best of {args.repeats}):")
    for name, job_args in jobs:
        fast = getattr(numba_backend, name)
        slow = getattr(numpy_backend, name)
        np.testing.assert_array_equal(fast(*job_args), slow(*job_args))
        t_numba = best_of(args.repeats, fast, *job_args)
        t_numpy = best_of(args.repeats, slow, *job_args)
        print(
            f"  {name:22s} numba {t_numba * 1e3:8.2f} ms   "
            f"numpy {t_numpy * 1e3:8.2f} ms   "
            f"ratio {t_numpy / t_numba:5.2f}x"
        )


CHILD_CODE = """
import json, sys, time
from fdrlab._backend import BACKEND_NAME
from fdrlab.simlab import ProcedureSpec, Scenario, run_study

n, replicates = int(sys.argv[1]), int(sys.argv[2])
def scenario(reps):
    return Scenario(n=n, p0=0.8, effect=3.0, correlation="independent",
                    sidedness="two_sided", replicates=reps, seed=1,
                    procedure=ProcedureSpec(name="bh", q=0.05))
run_study(scenario(50))  # warmup: JIT compile outside the clock
start = time.perf_counter()
report = run_study(scenario(replicates))
elapsed = time.perf_counter() - start
print(json.dumps({"backend": BACKEND_NAME, "seconds": elapsed,
                  "fdr_hat": report.rates.fdr_hat}))
"""


def bench_study(args):
    print(f"\nend-to-end bh study, n={args.n}, {args.replicates} replicates:")
    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, FDRLAB_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, "-c", CHILD_CODE, str(args.n), str(args.replicates)],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            print(f"  {backend}: failed ({proc.stderr.strip().splitlines()[-1]})")
            continue
        results[backend] = json.loads(proc.stdout)
        r = results[backend]
        print(f"  {backend:6s} {r['seconds']:7.2f} s   fdr_hat={r['fdr_hat']:.6f}")
    if len(results) == 2:
        assert results["numba"]["fdr_hat"] == results["numpy"]["fdr_hat"], (
            "backends must agree exactly"
        )
        ratio = results["numpy"]["seconds"] / results["numba"]["seconds"]
        print(f"  numpy/numba wall-time ratio: {ratio:.2f}x; results identical")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--replicates", type=int, default=20_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)
    bench_kernels(args)
    bench_study(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
