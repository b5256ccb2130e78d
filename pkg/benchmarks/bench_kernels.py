"""Compare the compiled and numpy symmetric-function kernels.

Usage: python3 benchmarks/bench_kernels.py [--rows 20000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from confcurv import _sigma_py

try:
    from confcurv import _sigma_ext
except ImportError:
    _sigma_ext = None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = {"python": _sigma_py}
    if _sigma_ext is not None:
        backends["cython"] = _sigma_ext
    else:
        print("compiled extension not built; timing the numpy kernels only")
    print(f"{'n':>3} {'kernel':<18} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for n in (3, 4, 6, 8):
        lam = rng.normal(size=(args.rows, n))
        for kernel, call in (("esf_batch", lambda m: m.esf_batch(lam, n)),
                             ("esf_deleted_batch", lambda m: m.esf_deleted_batch(lam, n))):
            ref = call(_sigma_py)
            times = {}
            for name, mod in backends.items():
                if not np.allclose(call(mod), ref, rtol=1e-12, atol=1e-12):
                    raise SystemExit(f"{name} disagrees with the reference for n={n}, {kernel}")
                times[name] = min(timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat))
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            cols = " ".join(f"{1e3 * times[b]:10.3f}ms" for b in backends)
            print(f"{n:>3} {kernel:<18} {cols}   {speed:7.2f}x")


if __name__ == "__main__":
    main()
