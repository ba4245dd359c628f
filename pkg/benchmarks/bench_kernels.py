"""Time the compiled kernels against the NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0] [--json out.json]

The grid matches one view block of the reference geometry (512 channels,
5 rows) with a reduced view count controlled by ``--scale``.  Results are
checked for agreement before any timing is reported.
"""
import argparse
import json
import time

import numpy as np

from lowsig import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases(scale, rng):
    views = max(8, int(180 * scale))
    x = rng.poisson(40.0, (512, 5, views)).astype(float)
    sd = rng.uniform(0.5, 40.0, x.shape)
    sr = rng.uniform(0.05, 3.0, x.shape)
    mask = x > 50
    nv = max(16, int(720 * scale))
    q = rng.normal(size=(nv, 512))
    th = np.arange(nv) * np.pi / nv
    xs = np.linspace(-18, 18, 256)
    return {
        "local_moments 7x5x3": lambda k: k.local_moments(x, (3, 2, 1)),
        "bilateral 13x7x3": lambda k: k.bilateral(x, sd, sr, (6, 3, 1)),
        "window_median 3x3x3": lambda k: k.window_median(x, (1, 1, 1), mask),
        "backproject 256^2": lambda k: k.backproject(q, np.cos(th), np.sin(th), xs, xs, 0.0703125),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="fraction of the default view count")
    ap.add_argument("--json", help="write the timings here as well")
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "cython" not in names:
        print("compiled backend not built; only the fallback will be timed")
    impls = {n: kernels.get_backend(n) for n in names}
    rng = np.random.default_rng(0)
    rows = []
    print(f"threads: {kernels.num_threads()}")
    print(f"{'kernel':<22}" + "".join(f"{n:>12}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for label, fn in cases(args.scale, rng).items():
        timings, outs = {}, {}
        for n, impl in impls.items():
            timings[n], outs[n] = best_of(lambda: fn(impl), args.repeat)
        if len(outs) > 1:
            a, b = (np.asarray(o) for o in (outs["cython"], outs["python"]))
            if isinstance(outs["cython"], tuple):
                ok = all(np.allclose(u, v, rtol=1e-12, atol=1e-12) for u, v in zip(outs["cython"], outs["python"]))
            else:
                ok = np.allclose(a, b, rtol=1e-12, atol=1e-12)
            if not ok:
                raise SystemExit(f"{label}: backends disagree")
        line = f"{label:<22}" + "".join(f"{timings[n]:>11.3f}s" for n in names)
        if len(names) > 1:
            line += f"{timings['python'] / timings['cython']:>9.1f}x"
        print(line)
        rows.append({"kernel": label, **{f"{n}_s": timings[n] for n in names}})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"threads": kernels.num_threads(), "scale": args.scale, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
