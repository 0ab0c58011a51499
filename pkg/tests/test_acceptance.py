"""Acceptance criteria 1-11.

Each test prints one line ``PASS``/``FAIL criterion N: ...`` with the
measured quantity, the pinned tolerance and the runtime budget. Run alone
with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import json
import math
from pathlib import Path
import sys
import time

import numpy as np
import pytest

from roughsing import _kernels, cli, grid as G, lp, normlab as NL, operators as ops
from roughsing import sphere as sph, weights as W

# pinned tolerances
TOL_TRANSFORM = 1e-12
TOL_PSI = 1e-14
TOL_CANCEL = 1e-12
TOL_HILBERT = 0.02
TOL_CONST_B = 1e-13
TOL_KERNEL_FORM = 1e-10
TOL_LINEAR_B = 0.02
SLOPE_HIGH_MIN = 1.9
UNIFORMITY = 2.0
TOL_DECOMP = 1e-8
TOL_WEIGHT_ORACLE = 0.01
TOL_DUALITY = 1e-9
SCALING_SLOPE_MAX = 2.3
RATIO_SPREAD_MAX = 10.0

OM2 = sph.from_harmonic(2, 2)
PLANE = G.make_grid(2, 256, 8.0)


@pytest.fixture
def verdict(capsys):
    state = {"t0": time.perf_counter()}

    def emit(n, title, ok, detail, limit):
        dt = time.perf_counter() - state["t0"]
        ok = bool(ok) and dt < limit
        with capsys.disabled():
            sys.stdout.write(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {title} | "
                             f"{detail} | {dt:.1f}s (limit {limit:g}s)\n")
        assert ok, f"criterion {n}: {detail}"

    return emit


def _cn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_criterion_01_transforms(verdict):
    rng = np.random.default_rng(1)
    errs = {}
    for n, M in ((1, 4096), (2, 256)):
        spec = G.make_grid(n, M, 8.0)
        f = G.GridFunction(spec, _cn(rng, spec.shape))
        scale = np.abs(f.values).max()
        errs[f"inverse n={n}"] = np.abs(G.idft(G.dft(f)).values - f.values).max() / scale
        a = G.lp_norm(f, 2) ** 2
        errs[f"parseval n={n}"] = abs(a - np.sum(np.abs(G.dft(f).values) ** 2)) / a
    r = rng.uniform(0, 3, 1000)
    P = lp.DEFAULT_PROFILE
    psi = np.abs(P.psi(r) ** 3 + P.phi(2 * r) - P.phi(r)).max()
    line = G.make_grid(1, 1024, 16.0)
    f = G.GridFunction(line, _cn(rng, 1024))
    tot = sum(lp.delta_j(f, j, 3).values for j in range(-3, 2))
    ref = lp.partial_sum(f, -3).values - lp.partial_sum(f, 2).values
    tel = np.abs(tot - ref).max() / np.abs(f.values).max()
    worst = max(errs.values())
    ok = worst <= TOL_TRANSFORM and psi <= TOL_PSI and tel <= TOL_TRANSFORM
    verdict(1, "transform/partition suite", ok,
            f"dft {worst:.1e}, psi identity {psi:.1e}, telescoping {tel:.1e}", 10)


def test_criterion_02_cancellation(verdict):
    mom = max(sph.moments(sph.from_harmonic(2, m, kind=k)).max_abs()
              for m in (2, 3, 4, 5, 8, -3) for k in ("cos", "sin"))
    rng = np.random.default_rng(2)
    om = sph.SphereSymbol(2, rng.standard_normal(64))
    p1 = sph.project_cancellation(om)
    idem = np.abs(sph.project_cancellation(p1).values - p1.values).max()
    spec = G.make_grid(2, 128, 4.0)
    one = G.GridFunction(spec, np.ones(spec.shape))
    kill = max(np.abs(ops.apply_T_eps(s, one, spec.h).values).max()
               for s in (OM2, sph.from_harmonic(2, 3), sph.from_harmonic(2, 2, kind="sin")))
    ok = mom <= TOL_CANCEL and idem <= TOL_CANCEL and kill <= TOL_CANCEL
    verdict(2, "cancellation suite", ok,
            f"moments {mom:.1e}, projection {idem:.1e}, constants {kill:.1e}", 10)


def test_criterion_03_hilbert(verdict):
    spec = G.make_grid(1, 4096, 64.0)
    om = sph.from_pair(1.0, -1.0)
    x = spec.coords()[0]
    xi = spec.freqs()[0]
    win = ops.window(spec)
    errs = []
    for xi0 in (0.75, 1.0, 1.5):
        f = G.GridFunction(spec, np.exp(-x * x / 32.0) * np.cos(xi0 * x) * win)
        got = ops.apply_T_eps(om, f, spec.h).values
        want = np.fft.ifft(np.fft.fft(f.values) * (-1j * np.pi * np.sign(xi)))
        errs.append(np.linalg.norm(got - want) / np.linalg.norm(want))
    worst = max(errs)
    verdict(3, "Hilbert oracle", worst <= TOL_HILBERT,
            f"relative L2 error {', '.join(f'{e:.4f}' for e in errs)} (tol {TOL_HILBERT})", 30)


def test_criterion_04_commutators(verdict):
    rng = np.random.default_rng(4)
    f = G.GridFunction(PLANE, NL.make_probe(PLANE, rng))
    const = ops.LipschitzSymbol(G.GridFunction(PLANE, np.full(PLANE.shape, 3.0)), 0.0)
    c0 = np.abs(ops.apply_C(const, OM2, f).values).max()

    spec = G.make_grid(2, 64, 4.0)
    bv = np.sin(spec.coords()[0]) * np.cos(spec.coords()[1])
    b = ops.LipschitzSymbol(G.GridFunction(spec, bv), math.sqrt(2))
    g = G.GridFunction(spec, _cn(rng, spec.shape))
    kform = 0.0
    for k in range(*ops.default_krange(spec)):
        band = ops.KernelBand(k, OM2, 3, spec)
        two = ops.commutator_band(b, band, g).values.ravel()
        ker = _kernels.direct_sum(band.realization(), g.values, bv, 64, 2, spec.h ** 2)
        kform = max(kform, np.abs(two - ker).max() / np.abs(ker).max())

    lin = ops.linear_symbol(PLANE, [1.0, 0.0])
    om1 = sph.from_function(lambda t: np.cos(2 * t) * np.cos(t))
    lhs = ops.apply_C(lin, OM2, f).values
    rhs = ops.apply_T_eps(om1, f, PLANE.h).values
    red = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
    ok = c0 <= TOL_CONST_B and kform <= TOL_KERNEL_FORM and red <= TOL_LINEAR_B
    verdict(4, "commutator identities", ok,
            f"constant b {c0:.1e}, kernel form {kform:.1e}, linear reduction {red:.1e}", 120)


def test_criterion_05_multiplier_decay(verdict):
    _, high = cli.multiplier_decay(OM2, 0, 2, 6, "high")
    _, low = cli.multiplier_decay(OM2, 0, 2, 6, "low")
    ratios = {}
    for side in ("low", "high"):
        for i in (1, 2, 3, 4):
            for k in (-1, 0, 1):
                ratios[side, i, k] = ops.second_derivative_ratio(OM2, i, k, side)
    C = max(ratios.values())
    spread = max(max(ratios[s, i, k] for k in (-1, 0, 1)) / min(ratios[s, i, k] for k in (-1, 0, 1))
                 for s in ("low", "high") for i in (1, 2, 3, 4))
    ok = high.slope >= SLOPE_HIGH_MIN and low.slope > 0 and spread <= UNIFORMITY
    verdict(5, "multiplier decay", ok,
            f"high slope {high.slope:.3f} (>= {SLOPE_HIGH_MIN}), low beta {low.slope:.3f}, "
            f"d2 ratio C={C:.2f}, spread over k {spread:.3f}", 120)


def test_criterion_06_kernel_dini(verdict):
    b = ops.linear_symbol(PLANE, [1.0, 0.0])
    S = ops.make_sampleset(PLANE, 200, seed=6)
    worst = 1.0
    parts = []
    for side, om in (("low", OM2), ("high", OM2)):
        rs = [ops.kernel_estimate_check(b, om, j, side, sampleset=S) for j in (1, 2, 3)]
        for key in ("size_ratio", "smooth_ratio"):
            v = [r[key] for r in rs]
            worst = max(worst, max(v) / v[0])
            parts.append(f"{side} {key.split('_')[0]} max {max(v):.3f}")
    dini_err = max(abs(ops.dini_norm(N) - (1 + N * math.log(2))) for N in range(0, 20))
    ok = worst <= UNIFORMITY and dini_err == 0.0
    verdict(6, "kernel Dini suite", ok,
            f"{', '.join(parts)}; growth over j {worst:.3f} (<= {UNIFORMITY}); dini exact", 120)


def test_criterion_07_band_decay(verdict):
    b = ops.linear_symbol(PLANE, [1.0, 0.0])
    detail = []
    ok = True
    for side in ("low", "high"):
        rows, fit = NL.decay_experiment(b, OM2, side, 4)
        v = [e.value for _, e in rows]
        dec = all(a > c for a, c in zip(v, v[1:]))
        ok &= dec and fit is not None and -fit.slope > 0
        detail.append(f"{side} " + "/".join(f"{x:.3g}" for x in v)
                      + f" rate {-fit.slope:.3f} ({fit.sample_count} pts)")
    rng = np.random.default_rng(7)
    f = G.GridFunction(PLANE, NL.make_probe(PLANE, rng))
    # enough pieces that every resolvable annulus is reached from every shell
    lo, hi = lp.resolvable_range(PLANE)
    kmin, kmax = ops.default_krange(PLANE)
    J = math.ceil(math.log2(max(kmax - lo, hi - kmin + 1)))
    tot = sum(ops.apply_comm_T1jN(b, OM2, f, j).values + ops.apply_comm_T2jN(b, OM2, f, j).values
              for j in range(1, J + 1))
    ref = ops.apply_C(b, OM2, f).values
    dec_err = np.abs(tot - ref).max() / np.abs(ref).max()
    ok &= dec_err <= TOL_DECOMP
    verdict(7, "band decay", ok, "; ".join(detail) + f"; decomposition {dec_err:.1e}", 300)


def test_criterion_08_weights(verdict):
    line = G.make_grid(1, 1024, 16.0)
    fam = W.make_family(line)
    plane_fam = W.make_family(G.make_grid(2, 64, 4.0))
    unit = [W.ap_characteristic(W.unit_weight(1), 2.0, fam),
            W.ap_characteristic(W.unit_weight(2), 2.0, plane_fam)]
    worst, bounded = 0.0, True
    for a in (0.3, 0.5, 0.8):
        oracle = 1.0 / (1.0 - a * a)
        worst = max(worst, abs(W.centered_interval_ap(a, 2.0) - oracle) / oracle)
        # the family contains the centred intervals, and is a lower bound for the sup
        got = W.ap_characteristic(W.PowerWeight(a, 1), 2.0, fam)
        bounded &= oracle * (1 - 1e-12) <= got <= W.power_ap_sup_1d(a) * (1 + 1e-9)
    dual = 0.0
    for p in (1.5, 3.0):
        w = W.PowerWeight(0.5, 2)
        lhs = W.ap_characteristic(W.dual_weight(w, p), p / (p - 1), plane_fam)
        rhs = W.ap_characteristic(w, p, plane_fam) ** (1 / (p - 1))
        dual = max(dual, abs(lhs - rhs) / rhs)
    ok = unit == [1.0, 1.0] and worst <= TOL_WEIGHT_ORACLE and bounded and dual <= TOL_DUALITY
    verdict(8, "weight machinery", ok,
            f"[1]={unit}, closed form {worst:.1e}, family >= oracle {bounded}, duality {dual:.1e}", 60)


def test_criterion_09_scaling(verdict):
    b = ops.linear_symbol(PLANE, [1.0, 0.0])
    alphas = [0.0, 0.3, -0.3, 0.6, -0.6, 0.8, -0.8]
    rows, fit = NL.weight_scaling_experiment(b, OM2, alphas, 2.0, W.make_family(PLANE))
    r = [row["ratio"] for row in rows]
    spread = max(r) / min(r)
    ok = fit.slope <= SCALING_SLOPE_MAX and spread <= RATIO_SPREAD_MAX
    verdict(9, "A2 scaling", ok,
            f"slope {fit.slope:.3f} (<= {SCALING_SLOPE_MAX}), ratio spread {spread:.3f} "
            f"(<= {RATIO_SPREAD_MAX})", 900)


def test_criterion_10_interpolation(verdict):
    exact = NL.sw_combine(4, 9, 0.5) == 6
    agree = all(NL.sw1_combine(k, k, e, "proof") == pytest.approx(NL.sw1_combine(k, k, e, "statement"),
                                                                   rel=1e-15)
                for k in (0.5, 3.0) for e in (0.1, 0.9))
    b = ops.linear_symbol(PLANE, [1.0, 0.0])
    fam = W.make_family(PLANE)
    cases = [(sph.from_harmonic(2, 3), W.PowerWeight(0.5, 2), 2),
             (OM2, W.PowerWeight(0.5, 2), 1),
             (OM2, W.PowerWeight(-0.5, 2), 2),
             (OM2, None, 2)]
    ratios, holds = [], True
    for om, w, j in cases:
        res = NL.interpolation_consistency_experiment(b, om, j, 2.0, w, 1.0, fam)
        holds &= res["holds"]
        ratios.append(res["ratio"])
    gamma = 0.5
    C = NL.geometric_sum_majorant(gamma)
    geo = [NL.geometric_sum(R, gamma) / R for R in (1, 2, 4, 8)]
    ok = exact and agree and holds and max(geo) <= C
    verdict(10, "interpolation combinators", ok,
            f"sw=6 {exact}, variants agree {agree}, measured/combined "
            + "/".join(f"{x:.3f}" for x in ratios)
            + f", sum/R max {max(geo):.2f} <= C {C:.2f}", 300)


def test_criterion_11_determinism(verdict, tmp_path, capsys):
    small = ["--M", "64", "--L", "4", "--omega-m", "2", "--seed", "123", "--json"]
    same = True
    names = []
    for cmd in ("decay", "weights", "multiplier", "kernelcheck"):
        paths = []
        for sub in ("a", "b"):
            assert cli.run([cmd, *small, "--out", str(tmp_path / sub)]) == 0
            out = capsys.readouterr().out
            paths.append({k: Path(v) for k, v in json.loads(out)["paths"].items()})
        a, c = paths
        for key in a:
            if key == "manifest":
                ma, mc = (json.loads(p[key].read_text()) for p in (a, c))
                ma.pop("timestamp"), mc.pop("timestamp")
                same &= ma == mc
            else:
                same &= a[key].read_bytes() == c[key].read_bytes()
        names.append(cmd)
    verdict(11, "determinism", same, f"byte-identical reruns of {', '.join(names)}", 600)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
