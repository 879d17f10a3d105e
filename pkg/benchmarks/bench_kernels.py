"""Timing comparison of the permutation-twirl kernels.

Runs the jit-compiled kernel (when numba is importable) against the
pure-numpy twin on identical inputs and prints one row per copy count.
The numbers answer one question: is the compiled path worth keeping at
the hot sizes, joint dimensions up to a few hundred and up to eight
copies? Run as `python3 benchmarks/bench_kernels.py`.
"""

import argparse
import math
import time

import numpy as np

from obsavg import _kernels
from obsavg.symspace import CopySpace, _digit_table, _gather_table


def best_of(fn, args, repeats: int) -> float:
    """Best wall time over repeats, after one untimed warmup call."""
    fn(*args)
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_row(local_dim: int, n_copies: int, repeats: int, seed: int) -> dict:
    space = CopySpace(local_dim, n_copies)
    dim = space.total_dim
    digits, weights = _digit_table(local_dim, n_copies)
    gathers = _gather_table(n_copies)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    x = (g + g.conj().T) / 2
    args = (x, digits, gathers, weights)
    row = {
        "local_dim": local_dim,
        "copies": n_copies,
        "dim": dim,
        "perms": math.factorial(n_copies),
        "numpy_ms": best_of(_kernels.twirl_mean_numpy, args, repeats) * 1e3,
    }
    if _kernels.HAVE_NUMBA:
        row["numba_ms"] = best_of(_kernels.twirl_mean, args, repeats) * 1e3
        row["speedup"] = row["numpy_ms"] / row["numba_ms"]
    return row


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--local-dim", type=int, default=2)
    parser.add_argument("--min-copies", type=int, default=2)
    parser.add_argument("--max-copies", type=int, default=7)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    opts = parser.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("compiled kernel unavailable (numba missing or OBSAVG_PURE_NUMPY"
              " set); timing the pure-numpy kernel only")
    header = f"{'d':>3} {'N':>3} {'dim':>6} {'perms':>6} {'numpy ms':>10}"
    if _kernels.HAVE_NUMBA:
        header += f" {'numba ms':>10} {'speedup':>8}"
    print(header)
    for n in range(opts.min_copies, opts.max_copies + 1):
        row = bench_row(opts.local_dim, n, opts.repeats, opts.seed)
        line = (f"{row['local_dim']:>3d} {row['copies']:>3d} {row['dim']:>6d} "
                f"{row['perms']:>6d} {row['numpy_ms']:>10.3f}")
        if _kernels.HAVE_NUMBA:
            line += f" {row['numba_ms']:>10.3f} {row['speedup']:>8.2f}"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
