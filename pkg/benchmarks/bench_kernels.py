"""Time the array kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--sizes 256,1024,2048] [--repeat 5] [--json out.json]

numba kernels are compiled (and their outputs checked against numpy) before
any timing starts.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from dseq import _kernels as K
from dseq.seqcore import Builtin, Window


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size: int, rng):
    x_int = rng.integers(-1000, 1000, size=(size, size))
    x_f = rng.standard_normal((size, size))
    rows = Window(min(size, 256) - 1, min(size, 256) - 1)
    rm, rn, k, l, v = Builtin("delta").rows_coo(rows)
    out = np.zeros(rows.shape, dtype=np.int64)
    return {
        "delta2d[int64]": lambda: K.delta2d(x_int),
        "delta2d[float64]": lambda: K.delta2d(x_f),
        "prefix2d[float64]": lambda: K.prefix2d(x_f),
        "suffix2d[float64]": lambda: K.suffix2d(x_f),
        "prefix_absmax2d": lambda: K.prefix_absmax2d(x_f),
        "scatter_apply[delta rows]": lambda: K.scatter_apply(rm, rn, k, l, v, x_int,
                                                             out.copy()),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,1024,2048")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", dest="json_out")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    names = [b for b in ("numpy", "numba") if b in K.BACKENDS]
    results = []
    for size in (int(s) for s in args.sizes.split(",")):
        cs = cases(size, rng)
        for name, fn in cs.items():
            outs = {}
            for b in names:  # warm-up doubles as an agreement check
                with K.using(b):
                    outs[b] = fn()
            if len(outs) == 2:
                assert np.array_equal(outs["numpy"], outs["numba"]), name
            row = {"size": size, "kernel": name}
            for b in names:
                with K.using(b):
                    row[b] = _best(fn, args.repeat)
            if len(names) == 2:
                row["speedup"] = row["numpy"] / row["numba"]
            results.append(row)
            extra = f"  x{row['speedup']:.2f}" if "speedup" in row else ""
            print(f"{size:>5}  {name:<28}" + "".join(f"  {b} {row[b] * 1e3:8.2f} ms" for b in names)
                  + extra)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
