"""Compiled kernels against the NumPy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints the best of
several repeats for each kernel and backend and checks that both agree.
"""
import argparse
import timeit

import numpy as np

from randlin import _fallback

try:
    from randlin import _kernels
except ImportError:
    _kernels = None


def cases(T, d, Q, seed=0):
    rng = np.random.default_rng(seed)
    mats = np.eye(d) + 0.3 * rng.normal(size=(T, d, d))
    q0 = np.linalg.qr(rng.normal(size=(d, d)))[0]
    src = rng.normal(size=(T, Q, d))
    x0 = rng.normal(size=(Q, d))
    inv = np.linalg.inv(mats)
    return {
        "qr_growth": lambda m: m.qr_growth(mats, q0, True),
        "affine_forward": lambda m: m.affine_forward(mats, src, x0),
        "affine_backward": lambda m: m.affine_backward(inv, src, x0),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a is None:
        return b is None
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"numpy": _fallback}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled kernels not built; timing the fallback only")
    print(f"T={args.steps} d={args.dim} Q={args.queries}")
    print(f"{'kernel':<16} " + " ".join(f"{b:>12}" for b in backends) + "   speedup  agree")
    for name, fn in cases(args.steps, args.dim, args.queries).items():
        times = {b: min(timeit.repeat(lambda m=m: fn(m), number=1, repeat=args.repeat))
                 for b, m in backends.items()}
        agree = "-"
        speed = ""
        if "cython" in backends:
            agree = "yes" if _same(fn(_fallback), fn(_kernels)) else "NO"
            speed = f"{times['numpy'] / times['cython']:8.1f}x"
        cells = " ".join(f"{1e3 * t:10.2f}ms" for t in times.values())
        print(f"{name:<16} {cells} {speed:>9}  {agree}")


if __name__ == "__main__":
    main()
