"""Time the numba kernels against their numpy fallbacks on the same inputs.

    python3 benchmarks/bench_backends.py [--repeats 5] [--scale 1.0] [--json out.json]

Each row reports the median wall time per backend and checks that both
backends return the same result.
"""
from __future__ import annotations

import argparse
import json
import statistics
import time

import numpy as np

from rfmseg.clustering import _kernels_numba as nb
from rfmseg.clustering import _kernels_numpy as npk
from rfmseg.synthetic import uniform_cube


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if a.dtype.kind == "f":
        return bool(np.allclose(a, b, rtol=1e-12, atol=1e-12))
    return bool(np.array_equal(a, b))


def cases(scale, rng):
    n_km = int(200_000 * scale)
    x = rng.normal(size=(n_km, 3))
    cents = rng.normal(size=(8, 3))
    labels = rng.integers(0, 8, size=n_km)
    cube = uniform_cube(int(20_000 * scale), seed=1)
    indptr, indices = nb.radius_neighbors(cube, 1.0)
    core = np.diff(indptr) >= 5
    agg = rng.normal(size=(int(2_000 * scale), 3))
    return [
        (f"assign n={n_km} k=8", lambda m: m.assign(x, cents)),
        (f"cluster_sums n={n_km} k=8", lambda m: m.cluster_sums(x, labels, 8)),
        (f"radius_neighbors n={len(cube)} eps=1", lambda m: m.radius_neighbors(cube, 1.0)),
        (f"dbscan_expand n={len(cube)}", lambda m: m.dbscan_expand(indptr, indices, core)),
        (f"agglomerate ward n={len(agg)}", lambda m: m.agglomerate(agg, 3)),
        (f"agglomerate average n={len(agg)}", lambda m: m.agglomerate(agg, 2)),
    ]


def canonical(name, out):
    # neighbour lists may come back in a different order within a row
    if name.startswith("radius"):
        indptr, indices = out
        rows = [np.sort(indices[indptr[i]:indptr[i + 1]]) for i in range(len(indptr) - 1)]
        return (indptr, np.concatenate(rows))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every problem size")
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args()

    rows = []
    print(f"{'kernel':<36} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  match")
    for name, run in cases(args.scale, np.random.default_rng(0)):
        a = run(nb)  # also compiles
        b = run(npk)
        t_nb = median_time(lambda: run(nb), args.repeats)
        t_np = median_time(lambda: run(npk), args.repeats)
        ok = same(canonical(name, a), canonical(name, b))
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "match": ok})
        print(f"{name:<36} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>7.1f}x  {'yes' if ok else 'NO'}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
            fh.write("\n")


if __name__ == "__main__":
    main()
