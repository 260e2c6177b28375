"""Compare the compiled Laguerre kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``.  Each row reports the best
of several repeats and the largest absolute difference between backends.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from sublap import _backend, _pykernels


def cases(rng):
    t = np.ascontiguousarray(rng.uniform(0, 50, 20_000))
    t1 = np.ascontiguousarray(rng.uniform(0, 20, 20_000))
    t2 = np.ascontiguousarray(rng.uniform(0, 20, 20_000))
    C1 = np.ascontiguousarray(rng.standard_normal(400))
    Cr = np.ascontiguousarray(rng.standard_normal((20_000, 64)))
    C2 = np.ascontiguousarray(rng.standard_normal((40, 40)))
    yield "laguerre_table k=1 N=200", "laguerre_table", (1, t, 200)
    yield "series1 k=0 N=400", "series1", (C1, 0, t)
    yield "series1_rows k=1 N=64", "series1_rows", (Cr, 1, t)
    yield "series2 k=(1,1) N=40x40", "series2", (C2, 1, 1, t1, t2)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "cython" not in _backend.BACKENDS:
        print("compiled backend not built; only the numpy fallback is available")
        return
    fast = _backend.BACKENDS["cython"]
    rng = np.random.default_rng(0)
    print(f"{'case':28s} {'numpy s':>10s} {'cython s':>10s} {'speedup':>8s} {'max|diff|':>10s}")
    for label, name, a in cases(rng):
        f_py, f_c = getattr(_pykernels, name), getattr(fast, name)
        t_py = min(timeit.repeat(lambda: f_py(*a), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: f_c(*a), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(f_py(*a)) - np.asarray(f_c(*a)))))
        print(f"{label:28s} {t_py:10.4f} {t_c:10.4f} {t_py / t_c:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
