"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each kernel runs once on both paths to compile and warm caches, then the
best of ``--repeat`` timings is reported together with the max deviation
between the two outputs.
"""
import argparse
import time

import numpy as np

from roughsing import _kernels, grid as G, sphere as sph, operators as ops, weights as W


def best_of(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(quick):
    M = 64 if quick else 128
    spec = G.make_grid(2, M, 4.0)
    fam = W.make_family(spec)
    w = W.PowerWeight(0.5, 2)
    P = W._prefix(W._physical(w, spec))
    yield ("fujii_wilson_sums", f"2D M={M}, {len(fam)} cubes",
           lambda nb: _kernels.fujii_wilson_sums(P, fam.starts, fam.sides, nb))

    band = ops.KernelBand(0, sph.from_harmonic(2, 2), 3, spec)
    rng = np.random.default_rng(0)
    xi = rng.uniform(-6, 6, (400 if quick else 2000, 2))
    yield ("polar_fourier_sum", f"khat at {len(xi)} frequencies",
           lambda nb: ops.khat(band, xi, use_numba=nb))

    Md = 32 if quick else 64
    sd = G.make_grid(2, Md, 4.0)
    K = ops.realize_kernel(sd, sph.from_harmonic(2, 2), sd.h, sd.L, 3)
    f = rng.standard_normal(sd.shape) + 0j
    b = sd.coords()[0]
    yield ("direct_sum", f"2D M={Md} brute-force commutator",
           lambda nb: _kernels.direct_sum(K, f, b, Md, 2, sd.h ** 2, nb))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    if _kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':20s} {'case':34s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s} {'max dev':>9s}")
    for name, desc, fn in cases(args.quick):
        fn(True)  # compile
        tn, a = best_of(lambda: fn(False), args.repeat)
        tj, c = best_of(lambda: fn(True), args.repeat)
        dev = float(np.max(np.abs(np.asarray(a) - np.asarray(c))) / max(1e-300, np.max(np.abs(a))))
        print(f"{name:20s} {desc:34s} {tn:10.4f} {tj:10.4f} {tn / tj:8.1f} {dev:9.1e}")


if __name__ == "__main__":
    main()
