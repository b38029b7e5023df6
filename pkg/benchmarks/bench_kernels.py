"""Timing comparison of the compiled fiber kernels against the numpy
fallback, plus an agreement check so the two paths cannot drift apart.

Run:  python3 benchmarks/bench_kernels.py [--grid N] [--rank R] [--reps K]
"""

import argparse
import time

import numpy as np

from vortexpair import _fiber_np

try:
    from vortexpair import _fiberext
except ImportError:
    _fiberext = None


def _rand_herm(rng, npts, r):
    a = rng.standard_normal((npts, r, r)) + 1j * rng.standard_normal((npts, r, r))
    return 0.5 * (a + np.conjugate(np.swapaxes(a, -1, -2)))


def _time(fn, reps):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=64, help="grid side; npts = grid^2")
    ap.add_argument("--rank", type=int, default=2)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    npts = args.grid * args.grid
    r = args.rank
    rng = np.random.default_rng(0)
    s = _rand_herm(rng, npts, r)
    a = _rand_herm(rng, npts, r)

    w_np, v_np = _fiber_np.eigh_batch(s)
    g = np.exp(w_np)
    k = np.abs(w_np[:, :, None] - w_np[:, None, :]) + 1.0

    rows = []

    def bench(name, np_fn, ext_fn):
        t_np = _time(np_fn, args.reps)
        if _fiberext is None:
            rows.append((name, t_np, None, None))
            return
        t_ext = _time(ext_fn, args.reps)
        d = np.max(np.abs(np_fn() - ext_fn()))
        rows.append((name, t_np, t_ext, d))

    sc = np.ascontiguousarray(s)
    vc = np.ascontiguousarray(v_np)
    ac = np.ascontiguousarray(a)
    gc = np.ascontiguousarray(g)
    kc = np.ascontiguousarray(k)

    bench("eigh_batch",
          lambda: _fiber_np.eigh_batch(s)[1],
          lambda: _fiberext.eigh_batch(sc)[1])
    bench("apply_one",
          lambda: _fiber_np.apply_one(g, v_np),
          lambda: _fiberext.apply_one(gc, vc))
    bench("apply_two",
          lambda: _fiber_np.apply_two(k, v_np, a),
          lambda: _fiberext.apply_two(kc, vc, ac))

    print("fiber kernels, %d points, rank %d (best of %d)" % (npts, r, args.reps))
    print("%-12s %10s %10s %8s %12s" % ("kernel", "numpy", "cython",
                                        "speedup", "max |diff|"))
    for name, t_np, t_ext, d in rows:
        if t_ext is None:
            print("%-12s %9.3fms %10s %8s %12s"
                  % (name, 1e3 * t_np, "n/a", "n/a", "n/a"))
        else:
            print("%-12s %9.3fms %9.3fms %7.2fx %12.3e"
                  % (name, 1e3 * t_np, 1e3 * t_ext, t_np / t_ext, d))
    if _fiberext is None:
        print("compiled extension not importable; numpy timings only")
        return
    worst = max(row[3] for row in rows if row[3] is not None)
    if worst > 1e-10:
        raise SystemExit("backend disagreement %.3e exceeds 1e-10" % worst)
    print("backends agree to %.3e" % worst)


if __name__ == "__main__":
    main()
