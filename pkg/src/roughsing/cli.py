"""The ``roughsing`` command.

Exit codes
----------
0  success, records written
2  configuration or usage error
3  numerical failure (non-convergence under ``--strict``)
4  an assertion failed in ``--check`` mode, or the self-test failed
"""
import argparse
import json
import logging
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import grid as G
from . import io as rio
from . import lp
from . import normlab as NL
from . import operators as ops
from . import sphere as sph
from . import weights as W

log = logging.getLogger("roughsing")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("weights", "apply", "opnorm", "decay", "growth", "scaling",
            "multiplier", "kernelcheck", "dini", "interp")


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config -> objects

def build_omega(cfg, spec):
    om = cfg["Omega"]
    t = om["type"]
    if t == "harmonic":
        sym = sph.from_harmonic(2, om["m"], om["amp"], om["S"], om["kind"])
    elif t == "nodes":
        try:
            sym = sph.SphereSymbol(spec.n, om["values"])
        except ValueError as exc:
            raise rio.ConfigError(f"Omega.values: {exc}") from exc
    elif t == "pair":
        sym = sph.from_pair(om["plus"], om["minus"])
    else:
        path = cfg.resolve(om["path"])
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except OSError as exc:
            raise rio.ConfigError(f"Omega.path: cannot read {path}") from exc
        except ValueError as exc:
            raise rio.ConfigError(f"Omega.path: expected numeric columns theta,value: {exc}") from exc
        data = data[np.argsort(data[:, 0])]
        S = data.shape[0]
        if not np.allclose(data[:, 0], 2 * np.pi * np.arange(S) / S, atol=1e-9):
            raise rio.ConfigError("Omega.path: angles must be 2 pi i / S, i = 0..S-1")
        try:
            sym = sph.SphereSymbol(2, data[:, 1])
        except ValueError as exc:
            raise rio.ConfigError(f"Omega.path: {exc}") from exc
    if om.get("project"):
        sym = sph.project_cancellation(sym)
    return sym


def _read_gridfunction(cfg, key, field):
    path = cfg.resolve(cfg[key][field])
    try:
        return G.GridFunction.from_bytes(Path(path).read_bytes())
    except OSError as exc:
        raise rio.ConfigError(f"{key}.{field}: cannot read {path}") from exc


def build(cfg):
    """Grid, symbol, Lipschitz symbol, weight, schedule and k-range of a config."""
    g = cfg["grid"]
    spec = G.make_grid(g["n"], g["M"], g["L"])
    omega = build_omega(cfg, spec)
    if cfg["b"]["type"] == "linear":
        b = ops.linear_symbol(spec, cfg["b"]["direction"])
    else:
        gf = _read_gridfunction(cfg, "b", "path")
        if gf.spec != spec:
            raise rio.ConfigError("b.path: grid of the sample differs from grid")
        b = ops.LipschitzSymbol(gf, cfg["b"]["grad_bound"])
    wt = cfg["weight"]
    if wt["type"] == "unit":
        w = None
    elif wt["type"] == "power":
        w = W.PowerWeight(wt["alpha"], spec.n)
    else:
        gf = _read_gridfunction(cfg, "weight", "path")
        if gf.spec != spec:
            raise rio.ConfigError("weight.path: grid of the sample differs from grid")
        w = W.SampledWeight(gf, "file")
    schedule = lp.JumpSchedule.parse(cfg["schedule"])
    krange = tuple(cfg["krange"]) if cfg["krange"] else None
    return spec, omega, b, w, schedule, krange


def _family(cfg, spec, params=None):
    params = params or {}
    return W.make_family(spec, params.get("s"), params.get("step_div", 3),
                         params.get("centered", True))


def _q(v):
    return math.inf if v in ("inf", None) else float(v)


# ---------------------------------------------------------------------------
# experiments: each returns (record, checks, payload)

def run_weights(cfg, threads):
    spec, _, _, w, _, _ = build(cfg)
    P = cfg["experiment"]
    w = W.unit_weight(spec.n) if w is None else w
    fam = _family(cfg, spec, P)
    rep = W.report(w, P["p"], fam)
    row = rep.as_dict()
    row.pop("weight")
    rec = rio.RunRecord(cfg, list(row), [row], kind="weights",
                        extra={"weight": w.descriptor()})
    checks = [
        ("ap >= 1", rep.ap >= 1.0 - 1e-12, rep.ap),
        ("A_inf constants >= 1", min(rep.ainf_w, rep.ainf_sigma) >= 1.0 - 1e-9,
         [rep.ainf_w, rep.ainf_sigma]),
        ("round = max(ainf)", rep.round == max(rep.ainf_w, rep.ainf_sigma), rep.round),
    ]
    return rec, checks, rep.as_dict()


def _probe(spec, width):
    c = spec.coords()
    r2 = sum(x * x for x in c)
    return G.GridFunction(spec, np.exp(-r2 / (2 * width ** 2)) * ops.window(spec))


def run_apply(cfg, threads):
    spec, omega, b, _, schedule, krange = build(cfg)
    P = cfg["experiment"]
    f = _probe(spec, P["probe_width"])
    op = P["operator"]
    if op == "C":
        out = ops.apply_C(b, omega, f, krange)
    elif op == "T_eps":
        eps = spec.h if P["eps"] is None else P["eps"]
        out = ops.apply_T_eps(omega, f, eps, P["degree"])
    elif op == "band":
        k = ops.default_krange(spec)[0] if P["k"] is None else P["k"]
        deg = spec.n + 1 if P["degree"] is None else P["degree"]
        out = ops.apply_band(ops.KernelBand(k, omega, deg, spec), f)
    elif op in ("T1", "T2"):
        fn = ops.apply_comm_T1jN if op == "T1" else ops.apply_comm_T2jN
        out = fn(b, omega, f, P["j"], schedule, krange)
    else:
        raise rio.ConfigError(f"experiment.operator: unknown operator {op!r}")
    flat = out.values.ravel()
    rows = [{"index": i, "re": float(z.real), "im": float(z.imag)} for i, z in enumerate(flat)]
    rec = rio.RunRecord(cfg, ["index", "re", "im"], rows, kind="apply",
                        extra={"l2": G.lp_norm(out, 2)})
    return rec, [], {"l2_norm": G.lp_norm(out, 2), "size": int(flat.size)}


def _operator(cfg, spec, omega, b, schedule, krange):
    P = cfg["experiment"]
    op = P["operator"]
    if op == "C":
        m = ops.C_multiplier(spec, omega, krange)
    elif op in ("T1", "T2"):
        side = "low" if op == "T1" else "high"
        m = ops.comm_multiplier(spec, omega, P["j"], side, schedule, krange)
    else:
        raise rio.ConfigError(f"experiment.operator: unknown operator {op!r}")
    return ops.BandOperator(spec, m, b, ops.window(spec), op)


def run_opnorm(cfg, threads):
    spec, omega, b, w, schedule, krange = build(cfg)
    P = cfg["experiment"]
    T = _operator(cfg, spec, omega, b, schedule, krange)
    est = NL.opnorm(T, P["p"], w, P["trials"], cfg["seed"], maxiter=int(P["maxiter"]),
                    tol=float(P["tol"]))
    row = {"operator": P["operator"], "value": est.value, "p": est.p,
           "method": est.method, "residual": est.residual,
           "converged": est.converged, "iterations": est.iterations}
    rec = rio.RunRecord(cfg, list(row), [row], kind="opnorm")
    return rec, [], est.as_dict(), [est]


def run_decay(cfg, threads):
    spec, omega, b, w, schedule, krange = build(cfg)
    P = cfg["experiment"]
    rows, fit = NL.decay_experiment(b, omega, P["side"], P["jmax"], P["p"], w,
                                    P["trials"], cfg["seed"], schedule, krange, threads)
    out = [{"j": j, "N": schedule(j), "N_prev": schedule(j - 1), "norm": e.value,
            "residual": e.residual, "converged": e.converged} for j, e in rows]
    fits = {"decay": fit.as_dict()} if fit else {}
    rec = rio.RunRecord(cfg, ["j", "N", "N_prev", "norm", "residual", "converged"], out,
                        fits, kind="decay")
    norms = [r["norm"] for r in out]
    tol = cfg["tolerances"]
    checks = [
        ("norms strictly decreasing in j", all(a > c for a, c in zip(norms, norms[1:])), norms),
        ("fitted decay rate positive",
         fit is not None and -fit.slope > tol["decay_rate_min"],
         None if fit is None else -fit.slope),
    ]
    return rec, checks, {"rows": out, "fit": fits.get("decay")}, [e for _, e in rows]


def run_growth(cfg, threads):
    spec, omega, b, w, schedule, krange = build(cfg)
    P = cfg["experiment"]
    fam = _family(cfg, spec) if w is not None else None
    rows, fit = NL.growth_experiment(b, omega, P["side"], P["jmax"], P["p"], w, fam,
                                     P["trials"], cfg["seed"], schedule, krange, threads)
    rec = rio.RunRecord(cfg, ["j", "N", "norm", "denominator", "ratio"], rows,
                        {"growth": fit.as_dict()}, kind="growth")
    ratios = [r["ratio"] for r in rows]
    fac = cfg["tolerances"]["growth_ratio_factor"]
    checks = [("ratio bounded across j", max(ratios) <= fac * ratios[0] * (1 + 1e-9), ratios)]
    return rec, checks, {"rows": rows, "fit": fit.as_dict()}


def run_scaling(cfg, threads):
    spec, omega, b, _, _, krange = build(cfg)
    P = cfg["experiment"]
    fam = _family(cfg, spec)
    rows, fit = NL.weight_scaling_experiment(b, omega, P["alphas"], P["p"], fam, _q(P["q"]),
                                             P["trials"], cfg["seed"], krange, threads)
    cols = ["alpha", "ap", "ainf_w", "ainf_sigma", "round", "curly", "norm",
            "predicted", "ratio", "residual", "converged"]
    rec = rio.RunRecord(cfg, cols, rows, {"scaling": fit.as_dict()}, kind="scaling",
                        extra={"family_hash": fam.hash})
    tol = cfg["tolerances"]
    ratios = [r["ratio"] for r in rows]
    checks = [
        ("log-log slope within bound", fit.slope <= tol["scaling_slope_max"], fit.slope),
        ("measured/predicted spread", max(ratios) / min(ratios) <= tol["ratio_spread_max"],
         max(ratios) / min(ratios)),
    ]
    ests = [NL.NormEstimate(r["norm"], P["p"], {}, 1, "power-iteration", r["residual"],
                            r["converged"]) for r in rows]
    return rec, checks, {"rows": rows, "fit": fit.as_dict()}, ests


def multiplier_decay(omega, k, imin, imax, side, M=64):
    """``max_annulus |m|`` for ``i`` in ``imin..imax`` and the log-log fit
    against ``2^-i``."""
    rows = []
    for i in range(imin, imax + 1):
        tab = ops.multiplier_table(omega, i, k, side, spec=ops.annulus_grid(i, k, side, M))
        rows.append({"side": side, "i": i, "k": k,
                     "max_abs": float(np.abs(tab.values).max())})
    fit = NL.fit_rate(f"multiplier-{side}", "2^-i", [2.0 ** -r["i"] for r in rows],
                      [r["max_abs"] for r in rows], kind="loglog")
    return rows, fit


def run_multiplier(cfg, threads):
    _, omega, _, _, _, _ = build(cfg)
    P = cfg["experiment"]
    sides = ["high", "low"] if P["side"] == "both" else [P["side"]]
    rows, fits, checks = [], {}, []
    tol = cfg["tolerances"]
    for side in sides:
        r, fit = multiplier_decay(omega, P["k"], P["imin"], P["imax"], side, P["M"])
        rows += r
        fits[f"multiplier-{side}"] = fit.as_dict()
        if side == "high":
            checks.append(("high-side slope", fit.slope >= tol["multiplier_slope_min"], fit.slope))
        else:
            checks.append(("low-side slope positive", fit.slope > 0, fit.slope))
    sd = []
    for side in sides:
        for i in P["sd_i"]:
            for k in P["sd_k"]:
                sd.append({"side": side, "i": i, "k": k,
                           "ratio": ops.second_derivative_ratio(omega, i, k, side)})
    C = max(r["ratio"] for r in sd)
    spread = 1.0
    for side in sides:
        for i in P["sd_i"]:
            v = [r["ratio"] for r in sd if r["side"] == side and r["i"] == i]
            spread = max(spread, max(v) / min(v))
    checks.append(("second-derivative ratio uniform in k",
                   spread <= tol["second_derivative_spread"], spread))
    rec = rio.RunRecord(cfg, ["side", "i", "k", "max_abs"], rows, fits, kind="multiplier",
                        key=["side", "i"], extra={"second_derivative": sd, "C": C})
    return rec, checks, {"rows": rows, "fits": fits, "second_derivative_C": C}


def run_kernelcheck(cfg, threads):
    spec, omega, b, _, schedule, krange = build(cfg)
    P = cfg["experiment"]
    S = ops.make_sampleset(spec, P["samples"], cfg["seed"])
    rows = []
    for j in range(1, P["jmax"] + 1):
        r = ops.kernel_estimate_check(b, omega, j, P["side"], schedule, S, spec, krange)
        rows.append({"side": P["side"], "j": j, "N": r["N"],
                     "size_ratio": r["size_ratio"], "smooth_ratio": r["smooth_ratio"]})
    fac = cfg["tolerances"]["kernel_uniformity_factor"]
    size = [r["size_ratio"] for r in rows]
    smooth = [r["smooth_ratio"] for r in rows]
    checks = [
        ("size ratio uniform in j", max(size) <= fac * size[0], size),
        ("smoothness ratio uniform in j", max(smooth) <= fac * smooth[0], smooth),
    ]
    rec = rio.RunRecord(cfg, ["side", "j", "N", "size_ratio", "smooth_ratio"], rows,
                        kind="kernelcheck", key=["j"],
                        extra={"C_size": max(size), "C_smooth": max(smooth)})
    return rec, checks, {"rows": rows}


def run_dini(cfg, threads):
    from scipy import integrate
    _, omega, b, _, _, _ = build(cfg)
    P = cfg["experiment"]
    rows, ok = [], True
    for N in P["N"]:
        mod = ops.dini_modulus(N)
        knee = 2.0 ** -N
        a, _ = integrate.quad(lambda t: float(mod(t)) / t, 0, knee)
        c, _ = integrate.quad(lambda t: float(mod(t)) / t, knee, 1)
        closed = ops.dini_norm(N)
        rows.append({"N": N, "dini_norm": closed, "quadrature": a + c,
                     "closed_form": 1 + N * math.log(2)})
        ok &= abs(a + c - closed) <= 1e-9 * closed
    rec = rio.RunRecord(cfg, ["N", "dini_norm", "quadrature", "closed_form"], rows, kind="dini")
    return rec, [("closed form matches quadrature", ok, None)], {"rows": rows}


def run_interp(cfg, threads):
    spec, omega, b, w, schedule, krange = build(cfg)
    P = cfg["experiment"]
    fam = _family(cfg, spec)
    r = NL.interpolation_consistency_experiment(b, omega, P["j"], P["p"], w, cfg["c_n"], fam,
                                                P["side"], 1, cfg["seed"], schedule, krange,
                                                gamma=P["gamma"])
    rec = rio.RunRecord(cfg, list(r), [r], kind="interp")
    checks = [("measured <= interpolated bound", r["measured"] <= r["combined"] *
               (1 + cfg["tolerances"]["interp_slack"]), r["ratio"]),
              ("geometric sum <= C R", r["geometric_sum"] <= r["geometric_bound"],
               [r["geometric_sum"], r["geometric_bound"]])]
    return rec, checks, r


RUNNERS = {
    "weights": run_weights, "apply": run_apply, "opnorm": run_opnorm,
    "decay": run_decay, "growth": run_growth, "scaling": run_scaling,
    "multiplier": run_multiplier, "kernelcheck": run_kernelcheck,
    "dini": run_dini, "interp": run_interp,
}


# ---------------------------------------------------------------------------
# self-test

def selftest(fault=None):
    """Fast invariant suite; returns a list of ``(name, passed, detail)``."""
    rng = np.random.default_rng(12345)
    out = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # report, never crash the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))

    spec = G.make_grid(2, 64, 4.0)
    f = G.GridFunction(spec, rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape))

    def roundtrip():
        e = np.abs(G.idft(G.dft(f)).values - f.values).max() / np.abs(f.values).max()
        return e <= 1e-12, e

    def parseval():
        a = G.lp_norm(f, 2) ** 2
        c = float(np.sum(np.abs(G.dft(f).values) ** 2))
        return abs(a - c) <= 1e-12 * a, abs(a - c) / a

    prof = lp.MollifierProfile(psi_sign=-1.0) if fault == "psi-sign" else lp.DEFAULT_PROFILE

    def psi_identity():
        r = rng.uniform(0, 3, 1000)
        e = np.abs(prof.psi(r) ** 3 + prof.phi(2 * r) - prof.phi(r)).max()
        return e <= 1e-14, e

    def telescoping():
        s = G.make_grid(1, 256, 16.0)
        g = G.GridFunction(s, rng.standard_normal(s.shape))
        tot = sum(lp.delta_j(g, j, 3, prof).values for j in range(-3, 2))
        ref = (lp.partial_sum(g, -3, prof).values - lp.partial_sum(g, 2, prof).values)
        e = np.abs(tot - ref).max()
        return e <= 1e-12 * max(1.0, np.abs(ref).max()), e

    def cancellation():
        m = max(sph.moments(sph.from_harmonic(2, k)).max_abs() for k in (2, 3, 5))
        return m <= 1e-12, m

    def projection():
        o = sph.from_function(lambda t: 1 + np.cos(t) + np.cos(2 * t) + np.sin(5 * t))
        p1 = sph.project_cancellation(o)
        p2 = sph.project_cancellation(p1)
        e = np.abs(p1.values - p2.values).max()
        return e <= 1e-13 and sph.check_cancellation(p1), e

    def kills_constants():
        one = G.GridFunction(spec, np.ones(spec.shape))
        o = sph.from_harmonic(2, 2)
        e = np.abs(ops.apply_T_eps(o, one, spec.h).values).max()
        return e <= 1e-12, e

    def sw():
        v = NL.sw_combine(4, 9, 0.5)
        u = NL.sw1_combine(5, 5, 0.3, "proof") - NL.sw1_combine(5, 5, 0.3, "statement")
        return v == 6.0 and abs(u) < 1e-14, v

    def dini():
        return abs(ops.dini_norm(4) - (1 + 4 * math.log(2))) < 1e-15, ops.dini_norm(4)

    for name, fn in (("dft round trip", roundtrip), ("parseval", parseval),
                     ("psi identity", psi_identity), ("telescoping", telescoping),
                     ("harmonic moments vanish", cancellation),
                     ("projection idempotent", projection),
                     ("T_eps kills constants", kills_constants),
                     ("sw arithmetic", sw), ("dini closed form", dini)):
        check(name, fn)
    return out


# ---------------------------------------------------------------------------
# argument parsing

def _json_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _common(p):
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("runs"), help="root of run directories")
    p.add_argument("--seed", type=int, help="seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="worker threads (env ROUGHSING_THREADS)")
    p.add_argument("--check", action="store_true", help="evaluate acceptance assertions")
    p.add_argument("--json", action="store_true", help="machine-readable stdout only")
    p.add_argument("--strict", action="store_true", help="non-convergence is an error")
    p.add_argument("--n", type=int, help="grid dimension")
    p.add_argument("--M", type=int, help="points per axis")
    p.add_argument("--L", type=float, help="half-width of the domain")
    p.add_argument("--omega-m", type=int, help="harmonic order m of Omega = amp cos(m theta)")
    p.add_argument("--omega-amp", type=float, help="amplitude of the harmonic symbol")
    p.add_argument("--alpha", type=float, help="power weight |x|^alpha")
    p.add_argument("--c-n", type=float, dest="c_n", help="constant c_n in eps = c_n/(2 (w))")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="experiment parameter (value parsed as JSON), repeatable")


def parser():
    ap = argparse.ArgumentParser(prog="roughsing", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in COMMANDS:
        _common(sub.add_parser(name, help=f"run the {name} experiment"))
    st = sub.add_parser("selftest", help="fast invariant suite")
    st.add_argument("--json", action="store_true")
    st.add_argument("--inject-fault", choices=["psi-sign"], help="seed a known fault")
    return ap


def _overrides(args):
    o = {}
    g = {k: getattr(args, k) for k in ("n", "M", "L") if getattr(args, k) is not None}
    if g:
        o["grid"] = g
    if args.omega_m is not None or args.omega_amp is not None:
        om = {"type": "harmonic"}
        if args.omega_m is not None:
            om["m"] = args.omega_m
        if args.omega_amp is not None:
            om["amp"] = args.omega_amp
        o["Omega"] = om
    if args.alpha is not None:
        o["weight"] = {"type": "power", "alpha": args.alpha}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.c_n is not None:
        o["c_n"] = args.c_n
    ex = {}
    for item in args.set:
        if "=" not in item:
            raise rio.ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        ex[k.strip()] = _json_value(v)
    if ex:
        o["experiment"] = ex
    return o


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("ROUGHSING_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise rio.ConfigError(f"ROUGHSING_THREADS: not an integer: {env!r}") from None


def _emit(args, payload, human):
    if args.json:
        sys.stdout.write(json.dumps(payload, sort_keys=True, default=_jsonable) + "\n")
    else:
        sys.stdout.write(human + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _run_selftest(args):
    t0 = time.time()
    res = selftest(args.inject_fault)
    ok = all(r[1] for r in res)
    if args.json:
        sys.stdout.write(json.dumps({"passed": ok, "seconds": time.time() - t0,
                                     "checks": [{"name": n, "passed": p, "detail": d}
                                                for n, p, d in res]},
                                    default=_jsonable, sort_keys=True) + "\n")
    else:
        for n, p, d in res:
            sys.stdout.write(f"{'PASS' if p else 'FAIL'}  {n}  ({d})\n")
    return EXIT_OK if ok else EXIT_CHECK


def run(argv=None):
    """Parse ``argv`` and run one command; returns the exit code."""
    ap = parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.command == "selftest":
        return _run_selftest(args)
    try:
        overrides = _overrides(args)
        if args.config is not None:
            cfg = rio.load_config(args.config, args.command, overrides)
        else:
            cfg = rio.RunConfig(rio.parse_config(overrides, args.command))
        threads = _threads(args)
        log.info("effective config %s", rio.canonical_json(cfg.data))
        result = RUNNERS[args.command](cfg, threads)
    except (rio.ConfigError, sph.CancellationError, ops.OperatorError, W.WeightError,
            G.GridError) as exc:
        sys.stderr.write(f"roughsing: configuration error: {exc}\n")
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        sys.stderr.write(f"roughsing: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    rec, checks, payload = result[:3]
    ests = result[3] if len(result) > 3 else []
    try:
        paths = rio.write_record(rec, Path(args.out) / cfg.hash[:16])
    except OSError as exc:
        sys.stderr.write(f"roughsing: cannot write results: {exc}\n")
        return EXIT_NUMERIC
    unconverged = [e for e in ests if not e.converged]
    body = {"command": args.command, "config_hash": cfg.hash,
            "paths": {k: str(v) for k, v in paths.items()}, "result": payload}
    if args.check:
        body["checks"] = [{"name": n, "passed": bool(p), "value": v} for n, p, v in checks]
    if args.command == "weights" and not args.json:
        sys.stdout.write(json.dumps(payload, sort_keys=True, default=_jsonable) + "\n")
    else:
        human = f"{args.command}: wrote {paths['csv'].parent}"
        if args.check:
            human += "\n" + "\n".join(f"{'PASS' if p else 'FAIL'}  {n}  ({v})"
                                      for n, p, v in checks)
        _emit(args, body, human)
    if args.strict and unconverged:
        sys.stderr.write(f"roughsing: {len(unconverged)} norm estimate(s) did not converge\n")
        return EXIT_NUMERIC
    if args.check and not all(p for _, p, _ in checks):
        sys.stderr.write("roughsing: acceptance check failed\n")
        return EXIT_CHECK
    return EXIT_OK


def main():
    logging.basicConfig(level=os.environ.get("ROUGHSING_LOGLEVEL", "WARNING"),
                        format="%(name)s: %(message)s", stream=sys.stderr)
    sys.exit(run())


if __name__ == "__main__":
    main()
