"""Time the Jacobi kernels: compiled extension against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 2,3,8,16,32,64]

Prints one row per (operation, size) with the best-of-``repeat`` time for
each backend and the speed-up. Results agree to within a few ulps, which is
checked on every run.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ctxval import linalg


def _cases(n, rng):
    a = rng.standard_normal((n, n + n // 2 + 1))
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return {"svd": a, "eigh": h + h.conj().T}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="2,3,8,16,32,64")
    args = ap.parse_args(argv)
    mods = linalg.kernel_modules()
    if "cython" not in mods:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(1)
    ops = {
        "svd": lambda x, k: linalg.svd(x, kernels=k)[1],
        "eigh": lambda x, k: linalg.eigh(x, kernels=k)[0],
    }
    print(f"{'op':<5} {'n':>4} " + " ".join(f"{name:>12}" for name in mods) + f" {'speed-up':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        cases = _cases(n, rng)
        for op, fn in ops.items():
            times, outs = {}, {}
            for name, mod in mods.items():
                outs[name] = fn(cases[op], mod)
                number = max(1, int(200 / n**2))
                times[name] = min(timeit.repeat(lambda: fn(cases[op], mod), number=number, repeat=args.repeat)) / number
            if len(outs) == 2:
                assert np.allclose(outs["python"], outs["cython"], rtol=1e-12, atol=1e-12)
            cells = " ".join(f"{times[name] * 1e3:>10.3f}ms" for name in mods)
            ratio = times["python"] / times["cython"] if "cython" in times else 1.0
            print(f"{op:<5} {n:>4} {cells} {ratio:>8.1f}x")


if __name__ == "__main__":
    main()
