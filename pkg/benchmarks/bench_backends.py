"""Time the hot kernels under numba and numpy.

Usage::

    python benchmarks/bench_backends.py [--K 1024] [--n 2000] [--d 100] [--repeats 3]

Prints a table and the numpy/numba ratio per kernel. The numpy column is
always measured; the numba column needs numba installed and
``SSC_DISABLE_NUMBA`` unset. ``ssc bench backends`` writes the same rows as CSV.
"""

import argparse
import warnings

warnings.filterwarnings("ignore", message=".*TBB.*")

from ssc import _accel
from ssc.bench import run_backend_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=1024)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rows = run_backend_bench(K=args.K, n=args.n, d=args.d, repeats=args.repeats)
    by_kernel = {}
    for r in rows:
        by_kernel.setdefault(r["kernel"], {})[r["backend"]] = r["time_s"]
    print(f"{'kernel':<20}{'numpy (s)':>12}{'numba (s)':>12}{'ratio':>8}")
    for name, t in by_kernel.items():
        nb = t.get("numba")
        ratio = f"{t['numpy'] / nb:8.1f}" if nb else f"{'-':>8}"
        nb_txt = f"{nb:12.4g}" if nb else f"{'-':>12}"
        print(f"{name:<20}{t['numpy']:12.4g}{nb_txt}{ratio}")
    if not _accel.HAS_NUMBA:
        print("numba unavailable or disabled; only numpy timings shown")


if __name__ == "__main__":
    main()
