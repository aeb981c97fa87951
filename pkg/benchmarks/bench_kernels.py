"""Time the numba kernels against their pure-numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from nmchannel import kernels
from nmchannel.channel import _segments
from nmchannel.config import ExperimentConfig


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def quadrature_case(discretized, masked, n_a=121, nodes=2 ** 16):
    cfg = ExperimentConfig.default()
    geom, spec = cfg.geometry(), cfg.spectrum()
    zeta = geom.angular_resolution
    lo, hi, n, pix = _segments(spec, cfg.mask(True) if masked else None, zeta if discretized else None, nodes)
    a = np.linspace(0, 0.6, n_a)
    return (lo, hi, n, pix, 0.0, spec.sigma, a / zeta, a, discretized, 0.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cases = []
    for disc in (True, False):
        for masked in (True, False):
            label = f"quadrature {'pixel' if disc else 'linear'} phase, {'masked' if masked else 'open'}"
            q = quadrature_case(disc, masked)
            cases.append((label, lambda q=q: kernels.phase_quadrature_numba(*q),
                          lambda q=q: kernels.phase_quadrature_numpy(*q)))
    corr = np.cos(np.radians(2 * np.subtract.outer(np.arange(180.0), np.arange(180.0))))
    cases.append(("CHSH grid 180x180", lambda: kernels.chsh_grid_max_numba(corr),
                  lambda: kernels.chsh_grid_max_numpy(corr)))

    print(f"{'kernel':42s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for label, fast, slow in cases:
        fast()   # compile outside the timed region
        tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{label:42s} {1e3 * tf:11.2f} {1e3 * ts:11.2f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
