"""Compare the numba and pure-numpy backends on the hot loops.

    python3 benchmarks/bench_kernels.py [--size 280] [--repeat 5]

Each backend is warmed up once (numba compiles or loads its cache) before
timing; the table reports the best of ``--repeat`` runs in milliseconds and
the largest difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from sss import _kernels
from sss.inference import slope_analysis, trace_streamlines
from sss.kernel import KernelWeights, support_radius
from sss.sim import generate_noise


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=280)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--direct", action="store_true", help="also time the 2-D double sum (slow)")
    args = ap.parse_args()

    if _kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    values = generate_noise(args.size, args.size, 0).values
    print(f"{args.size}x{args.size} image, best of {args.repeat}")
    print(f"{'kernel':<24}{'h':>4}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}{'max diff':>11}")

    cases = []
    for h in (2, 4, 8, 16):
        r = support_radius(h)
        kw = KernelWeights(float(h), r)
        cases.append(("separable moments", h, lambda kw=kw, r=r: _kernels.separable_moments(values, kw.taps, r, r)))
        if args.direct and h <= 4:
            cases.append(("direct moments", h, lambda kw=kw, r=r: _kernels.direct_moments(values, kw.table, r, r)))

    ramp = values + 0.5 * np.arange(args.size)[:, None]
    res = slope_analysis(ramp, 8, sigma=1.0)
    cases.append(("streamlines", 8, lambda: [ln.points for ln in trace_streamlines(res)]))

    for name, h, fn in cases:
        timings, outs = {}, {}
        for backend in ("numba", "numpy"):
            prev = _kernels.set_backend(backend)
            try:
                timings[backend], outs[backend] = best_of(fn, args.repeat)
            finally:
                _kernels.set_backend(prev)
        a, b = outs["numba"], outs["numpy"]
        if isinstance(a, list):
            diff = max((np.abs(x - y).max() for x, y in zip(a, b)), default=0.0) if len(a) == len(b) else np.inf
        else:
            diff = np.abs(a - b).max()
        speed = timings["numpy"] / timings["numba"]
        print(f"{name:<24}{h:>4}{timings['numba']:>11.2f}{timings['numpy']:>11.2f}{speed:>8.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
