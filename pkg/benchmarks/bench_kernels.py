"""Time the numba and numpy versions of each lattice kernel on the same inputs.

    python3 benchmarks/bench_kernels.py --n 64 128 --repeat 5 --csv bench.csv
"""

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from osclab import kernels
from osclab._accel import HAS_NUMBA
from osclab.lattice import LatticeParams, random_rogue_set
from osclab.stopping import StoppingParams, build_cover, build_step_function, compute_rho, kappa_maxlen


def _inputs(N, seed):
    lat = LatticeParams.from_scale(2, N)
    p = StoppingParams(eps=0.1, r0=4.0)
    E = random_rogue_set(lat, p.budget(lat), seed)
    rho = compute_rho(E, p)
    M = build_step_function(build_cover(rho, p).n, p, lat)
    L = lat.margin
    Mk = M.table(L).astype(np.int64)
    ann = kernels._annulus_max_np(rho.values, N, 2, L)
    kmask = ann <= Mk[1:, None]
    order = kernels.cover_order(rho.values, N, 2)
    morder = kernels.hull_order(rho.values)
    pre = E.index.ravel()
    return {
        "rho": (pre, N, 2, 0.1, p.j0, N),
        "cover": (order, rho.values, morder, N, 2),
        "annulus_max": (rho.values, N, 2, L),
        "kappa": (kmask, Mk, kappa_maxlen(L, p.m0)),
        "maximal": (pre, N, 2, N),
    }


def _time(fn, args, repeat):
    fn(*args)  # warm-up, includes jit compile
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        ts.append(time.perf_counter() - t)
    return statistics.median(ts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        print("numba unavailable: only the numpy column is meaningful", file=sys.stderr)

    rows = []
    for N in args.n:
        for name, a in _inputs(N, args.seed).items():
            nb, npf = kernels.IMPLEMENTATIONS[name]
            t_nb = _time(nb, a, args.repeat)
            t_np = _time(npf, a, args.repeat)
            rows.append((N, name, t_nb, t_np, t_np / t_nb if t_nb > 0 else float("nan")))

    print(f"{'N':>5} {'kernel':<12} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for N, name, a, b, r in rows:
        print(f"{N:>5} {name:<12} {a:>10.4f} {b:>10.4f} {r:>8.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "kernel", "numba_s", "numpy_s", "speedup"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
