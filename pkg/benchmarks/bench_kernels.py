"""Compare the numpy fallback with the compiled kernels.

    python benchmarks/bench_kernels.py [--paths 20000] [--steps 256] [--repeat 5]

Prints best-of-``repeat`` wall times per kernel and backend, the speed-up,
and whether the two backends agree bit for bit.
"""
import argparse
import time

import numpy as np

from swlp import kernels


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; run `python setup.py build_ext --inplace` first")
    coarse = kernels.normals(1, 0, args.paths, args.steps, 0.1)
    bridge = kernels.normals(1, 1, args.paths, args.steps, 0.05)
    probs = (np.arange(args.paths * args.steps) + 0.5) / (args.paths * args.steps)
    cases = {
        "normals": lambda: kernels.normals(7, 0, args.paths, args.steps, 1.0, args.threads),
        "split_increments": lambda: kernels.split_increments(coarse, bridge),
        "inverse_normal_cdf": lambda: kernels.inverse_normal_cdf(probs),
    }
    print(f"{args.paths} paths x {args.steps} steps, threads={args.threads}, best of {args.repeat}")
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speed-up':>10}{'identical':>11}")
    previous = kernels.BACKEND
    try:
        for name, fn in cases.items():
            times, outs = [], []
            for b in backends:
                kernels.use_backend(b)
                t, out = best_time(fn, args.repeat)
                times.append(t)
                outs.append(out)
            speedup = f"{times[0] / times[-1]:.1f}x" if len(times) > 1 else "-"
            same = str(all(np.array_equal(outs[0], o) for o in outs[1:]))
            print(f"{name:<20}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + f"{speedup:>10}{same:>11}")
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    main()
