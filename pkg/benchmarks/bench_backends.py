"""Time the numba kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_backends.py [--n 2000] [--repeat 3]

Each kernel is run once untimed (numba compile), then ``--repeat`` times.
Outputs of the two backends are checked for equality before timing.
"""

import argparse
import time

from emsnn.dataset_io import GenSpec, generate_points
from emsnn.kernels import _jit, _np
from emsnn.pipeline import ExecParams, run_blocked, run_traditional


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--n-traditional", type=int, default=300)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    pts = generate_points(GenSpec(args.n, args.d, 4, 5.0, seed=3))
    params = ExecParams(args.k, 4, 64 << 10, 4 << 10)
    small = pts[: args.n_traditional]

    a = run_blocked(pts, params, backend=_jit)
    b = run_blocked(pts, params, backend=_np)
    assert (a.knn == b.knn).all() and (a.labels == b.labels).all()
    assert [p.transfers for p in a.phases] == [p.transfers for p in b.phases]
    c = run_traditional(small, params, backend=_jit)
    d = run_traditional(small, params, backend=_np)
    assert [p.transfers for p in c.phases] == [p.transfers for p in d.phases]

    cases = [
        (f"blocked pipeline N={args.n}", lambda be: run_blocked(pts, params, backend=be)),
        (f"traditional LRU N={args.n_traditional}", lambda be: run_traditional(small, params, backend=be)),
    ]
    print(f"{'case':40s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fn in cases:
        t_jit = best_of(lambda: fn(_jit), args.repeat)
        t_np = best_of(lambda: fn(_np), args.repeat)
        print(f"{name:40s} {t_jit:10.3f} {t_np:10.3f} {t_np / t_jit:8.1f}")


if __name__ == "__main__":
    main()
