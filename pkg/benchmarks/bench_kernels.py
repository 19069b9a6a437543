"""Compare the compiled and pure-Python pulse kernels.

    python3 benchmarks/bench_kernels.py [--pulses N] [--spp S] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from mmsqueeze import _pycore, kernels


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pulses", type=int, default=200_000)
    ap.add_argument("--spp", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .` first")

    rng = np.random.default_rng(0)
    spp = args.spp
    amps = rng.standard_normal(args.pulses)
    decay = np.exp(-2 * np.pi * 300e6 / (156e6 * spp))
    samples, _ = _pycore.render_pulses(amps, spp, spp // 8, spp // 32, decay, 0.0)
    values = rng.standard_normal(args.pulses)
    bins = rng.integers(0, 16, args.pulses)

    cases = {
        "render_pulses": lambda m: m.render_pulses(amps, spp, spp // 8, spp // 32, decay, 0.0),
        "integrate_windows": lambda m: m.integrate_windows(samples, spp, 5, 20),
        "bin_moments": lambda m: m.bin_moments(values, bins, 16),
    }
    print(f"{args.pulses} pulses x {spp} samples, best of {args.repeat}")
    print(f"{'kernel':20s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in cases.items():
        a, b = call(_pycore), call(kernels.compiled_backend)
        a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
        for x, y in zip(a, b):
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12), name
        t_py = min(timeit.repeat(lambda: call(_pycore), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: call(kernels.compiled_backend), number=1, repeat=args.repeat))
        print(f"{name:20s} {1e3 * t_py:10.2f} {1e3 * t_cy:10.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
