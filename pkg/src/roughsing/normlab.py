"""Operator-norm measurement and the experiment suite.

Norms are always lower bounds. At ``p = 2`` they come from power iteration
on ``T^{*w} T`` with ``T^{*w} = w^{-1} T^* w``, the adjoint for the inner
product ``sum f conj(g) w h^n``; otherwise from the best of a set of random
probes. Probes are band-limited complex Gaussian fields cut to the window
``|x|_inf <= L/4``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.fft as sfft

from . import operators as ops
from .grid import GridFunction, _weight_values
from .lp import DEFAULT_PROFILE, POW2
from .sphere import lq_norm
from .weights import PowerWeight, epsilon_of, report as ap_report, unit_weight

__all__ = [
    "NormEstimate", "FittedRate", "opnorm", "make_probe", "fit_rate",
    "decay_experiment", "growth_experiment", "weight_scaling_experiment",
    "predicted_bound_thm11", "hrt_bound", "sw_combine", "sw1_combine",
    "interpolation_consistency_experiment", "geometric_sum",
    "geometric_sum_majorant",
]


@dataclass(frozen=True)
class NormEstimate:
    """Lower-bound estimate of an operator norm."""

    value: float
    p: float
    weight: dict
    trials: int
    method: str
    residual: float
    converged: bool = True
    iterations: int = 0
    lower_bound: bool = True

    def as_dict(self):
        return {"value": self.value, "p": self.p, "weight": self.weight,
                "trials": self.trials, "method": self.method,
                "residual": self.residual, "converged": self.converged,
                "iterations": self.iterations, "lower_bound": self.lower_bound}


@dataclass(frozen=True)
class FittedRate:
    """Least-squares line through log-transformed data.

    ``kind="loglog"`` fits ``log y`` against ``log x``; ``"loglinear"`` fits
    ``log2 y`` against ``x``. ``sample_count`` below 4 marks an
    underdetermined fit.
    """

    experiment: str
    abscissa: str
    kind: str
    x: tuple
    y: tuple
    slope: float
    intercept: float
    residual: float
    sample_count: int
    excluded: tuple = field(default_factory=tuple)

    @property
    def well_determined(self):
        return self.sample_count >= 4

    def as_dict(self):
        return {"experiment": self.experiment, "abscissa": self.abscissa,
                "kind": self.kind, "slope": self.slope,
                "intercept": self.intercept, "residual": self.residual,
                "sample_count": self.sample_count,
                "well_determined": self.well_determined,
                "excluded": list(self.excluded)}


def fit_rate(experiment, abscissa, x, y, kind="loglog"):
    """Fit a line to the positive samples of ``y``; zeros are listed as excluded."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = y > 0
    excluded = tuple(float(v) for v in x[~pos])
    xs, ys = x[pos], y[pos]
    if kind == "loglog":
        X, Y = np.log(xs), np.log(ys)
    elif kind == "loglinear":
        X, Y = xs, np.log2(ys)
    else:
        raise ValueError(f"unknown fit kind {kind!r}")
    if X.size < 2:
        raise ValueError("need at least two positive samples to fit")
    A = np.column_stack([X, np.ones_like(X)])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    return FittedRate(experiment, abscissa, kind, tuple(xs.tolist()), tuple(ys.tolist()),
                      float(coef[0]), float(coef[1]), resid, int(X.size), excluded)


# ---------------------------------------------------------------------------
# probes and norms

def make_probe(spec, rng, frac=0.25, shift=None):
    """Complex Gaussian field, low-passed to half the Nyquist radius, then windowed."""
    z = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    rad = spec.freq_radius()
    cut = 0.5 * np.pi / spec.h
    j0 = math.log2(1.0 / cut)
    z = sfft.ifftn(sfft.fftn(z) * DEFAULT_PROFILE.phi(2.0 ** j0 * rad))
    z = z * ops.window(spec, frac)
    if shift is not None:
        z = np.roll(z, tuple(shift), axis=tuple(range(spec.n)))
    return z


def _wnorm(v, p, wv, hn):
    a = np.abs(v)
    s = a.max()
    if s == 0:
        return 0.0
    t = (a / s) ** p
    if wv is not None:
        t = t * wv
    return float(s * (t.sum() * hn) ** (1.0 / p))


def opnorm(T, p=2.0, w=None, trials=1, seed=0, maxiter=2000, tol=1e-6,
           method=None, probe_shift=None):
    """Lower bound for ``||T||_{L^p(w) -> L^p(w)}``.

    Parameters
    ----------
    T : BandOperator
        Any object with ``spec``, ``apply`` and (for power iteration)
        ``adjoint`` acting on lattice arrays.
    p : float
    w : Weight, optional
    trials : int
        Independent random starts (power iteration) or probes.
    method : {"power-iteration", "random-probe"}, optional
        Defaults to power iteration at ``p = 2`` and probing otherwise.
    probe_shift : tuple of int, optional
        Rolls every probe by this many cells (translation tests).

    Returns
    -------
    NormEstimate
    """
    spec = T.spec
    if not 1 < p < np.inf:
        raise ValueError("p must lie in (1, inf)")
    wv = _weight_values(w, spec)
    wdesc = {"type": "unit"} if w is None else w.descriptor()
    hn = spec.h ** spec.n
    rng = np.random.default_rng(seed)
    if method is None:
        method = "power-iteration" if p == 2 else "random-probe"
    if method == "random-probe":
        best = 0.0
        for _ in range(trials):
            f = make_probe(spec, rng, shift=probe_shift)
            nf = _wnorm(f, p, wv, hn)
            if nf > 0:
                best = max(best, _wnorm(T.apply(f), p, wv, hn) / nf)
        return NormEstimate(best, p, wdesc, trials, method, float("nan"), True, trials)
    if p != 2:
        raise ValueError("power iteration is only available at p = 2")
    best, best_res, conv, its = 0.0, np.inf, True, 0
    wcol = 1.0 if wv is None else wv
    for _ in range(trials):
        f = make_probe(spec, rng, shift=probe_shift)
        lam_prev, res, ok = 0.0, np.inf, False
        it = 0
        lam = 0.0
        for it in range(1, maxiter + 1):
            nf = _wnorm(f, 2, wv, hn)
            if nf == 0:
                lam, res, ok = 0.0, 0.0, True
                break
            f = f / nf
            g = T.apply(f)
            lam = _wnorm(g, 2, wv, hn) ** 2
            if lam == 0:
                res, ok = 0.0, True
                break
            res = abs(lam - lam_prev) / lam
            if res < tol:
                ok = True
                break
            lam_prev = lam
            f = T.adjoint(wcol * g) / wcol
        val = math.sqrt(lam)
        if val >= best:
            best, best_res, conv, its = val, res, ok, it
    return NormEstimate(best, 2.0, wdesc, trials, "power-iteration", float(best_res), conv, its)


# ---------------------------------------------------------------------------
# experiments

def _jobs(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _band_op(b, omega, j, side, schedule, krange):
    spec = b.b.spec
    m = ops.comm_multiplier(spec, omega, j, side, schedule, krange)
    return ops.BandOperator(spec, m, b, ops.window(spec), f"[b,T_{side},{j}]")


def decay_experiment(b, omega, side="low", jmax=4, p=2.0, w=None, trials=1, seed=0,
                     schedule=POW2, krange=None, threads=1, probe_shift=None,
                     method=None, tol=1e-6):
    """Norms of the ``j``-pieces and their decay rate against ``N(j-1)``.

    Returns
    -------
    rows : list of (j, NormEstimate)
    fit : FittedRate or None
        Log-linear fit of ``log2 norm`` against ``N(j-1)``; the decay rate is
        ``-fit.slope``. Pieces that vanish identically on the lattice are
        excluded from the fit and listed in ``fit.excluded``.
    """
    if side == "high" and not ops.check_cancellation(omega):
        raise ops.OperatorError("the high side requires the cancellation condition")

    def one(j):
        T = _band_op(b, omega, j, side, schedule, krange)
        return j, opnorm(T, p, w, trials, seed, method=method, probe_shift=probe_shift, tol=tol)

    rows = sorted(_jobs(one, range(1, jmax + 1), threads), key=lambda r: r[0])
    vals = np.array([r[1].value for r in rows])
    top = vals.max() if vals.size else 0.0
    if top == 0:
        return rows, None
    y = np.where(vals > 1e-9 * top, vals, 0.0)
    x = [schedule(j - 1) for j, _ in rows]
    fit = None
    if np.count_nonzero(y) >= 2:
        fit = fit_rate(f"decay-{side}", "N(j-1)", x, y, kind="loglinear")
    return rows, fit


def growth_experiment(b, omega, side="low", jmax=4, p=2.0, w=None, family=None,
                      trials=1, seed=0, schedule=POW2, krange=None, threads=1, rep=None):
    """Weighted norms divided by ``(1+N(j)) {w}_{A_p} |Omega| |grad b|``.

    Returns
    -------
    rows : list of dict
        ``j``, ``N``, ``norm``, ``denominator`` and ``ratio`` per piece.
    fit : FittedRate
        Log-log fit of the norm against ``1+N(j)``; a slope at most 1 means
        no growth faster than linear in ``N(j)``.
    """
    spec = b.b.spec
    if rep is None:
        if w is None:
            curly = 1.0
        else:
            if family is None:
                from .weights import make_family
                family = make_family(spec)
            rep = ap_report(w, p, family)
    if rep is not None:
        curly = rep.curly
    onorm = lq_norm(omega, np.inf) if side == "low" else lq_norm(omega, 1)
    rows, _ = decay_experiment(b, omega, side, jmax, p, w, trials, seed, schedule,
                               krange, threads)
    out = []
    for j, est in rows:
        N = schedule(j)
        den = (1 + N) * curly * onorm * b.grad_bound
        out.append({"j": j, "N": N, "norm": est.value, "denominator": den,
                    "ratio": est.value / den if den > 0 else 0.0})
    fit = fit_rate(f"growth-{side}", "1+N(j)", [1 + r["N"] for r in out],
                   [r["norm"] for r in out], kind="loglog")
    return out, fit


def predicted_bound_thm11(rep, q, omega_norm, grad_norm):
    """``|Omega|_q {w}_{A_p} (w)_{A_p} |grad b|`` without constants.

    ``omega_norm`` may be a number (already the ``L^q`` norm) or a symbol.
    """
    if not isinstance(omega_norm, (int, float)):
        omega_norm = lq_norm(omega_norm, q)
    return float(omega_norm) * rep.curly * rep.round * float(grad_norm)


def weight_scaling_experiment(b, omega, alphas, p=2.0, family=None, q=np.inf,
                              trials=1, seed=0, krange=None, threads=1, tol=1e-6,
                              reports=None):
    """``||C_Omega||_{L^p(w)}`` against ``[w]_{A_p}`` for ``w = |x|^alpha``.

    Returns
    -------
    rows : list of dict
        Per ``alpha``: the report constants, the measured norm, the predicted
        bound and their ratio, sorted by ``alpha``.
    fit : FittedRate
        Log-log fit of the norm against ``[w]_{A_p}``.
    """
    spec = b.b.spec
    if not ops.check_cancellation(omega):
        raise ops.OperatorError("scaling experiment needs the cancellation condition")
    if family is None:
        from .weights import make_family
        family = make_family(spec)
    m = ops.C_multiplier(spec, omega, krange)
    T = ops.BandOperator(spec, m, b, ops.window(spec), "C")
    onorm = lq_norm(omega, q)

    def one(alpha):
        w = PowerWeight(float(alpha), spec.n)
        if not w.admissible(p):
            raise ValueError(f"alpha={alpha} is not admissible at p={p}")
        rep = reports[alpha] if reports and alpha in reports else ap_report(w, p, family)
        est = opnorm(T, p, w, trials, seed, tol=tol)
        pred = predicted_bound_thm11(rep, q, onorm, b.grad_bound)
        return {"alpha": float(alpha), "ap": rep.ap, "ainf_w": rep.ainf_w,
                "ainf_sigma": rep.ainf_sigma, "round": rep.round, "curly": rep.curly,
                "norm": est.value, "residual": est.residual,
                "converged": est.converged, "predicted": pred,
                "ratio": est.value / pred}

    rows = sorted(_jobs(one, list(alphas), threads), key=lambda r: r["alpha"])
    fit = fit_rate("scaling", "[w]_A2", [r["ap"] for r in rows], [r["norm"] for r in rows])
    return rows, fit


def hrt_bound(l2norm, C_K, dini, curly):
    """``(||T||_2 + C_K + ||omega||_Dini) {w}_{A_p}``."""
    for v in (l2norm, C_K, dini, curly):
        if v < 0:
            raise ValueError("inputs must be nonnegative")
    return (l2norm + C_K + dini) * curly


def sw_combine(M0, M1, lam):
    """``M0^lam M1^(1-lam)``."""
    if M0 <= 0 or M1 <= 0:
        raise ValueError("norms must be positive")
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    return M0 ** lam * M1 ** (1.0 - lam)


def sw1_combine(k0, k1, eps, variant="proof"):
    """Interpolated bound for ``L^p(w)`` from ``L^p`` (``k0``) and ``L^p(w^(1+eps))`` (``k1``).

    ``variant="proof"`` is ``k0^(eps/(1+eps)) k1^(1/(1+eps))``, the exponents
    of the Stein-Weiss line at ``w = (w^(1+eps))^(1/(1+eps))``;
    ``"statement"`` swaps the two exponents.
    """
    if k0 <= 0 or k1 <= 0:
        raise ValueError("norms must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    a, c = eps / (1 + eps), 1 / (1 + eps)
    if variant == "proof":
        return k0 ** a * k1 ** c
    if variant == "statement":
        return k0 ** c * k1 ** a
    raise ValueError(f"unknown variant {variant!r}")


def geometric_sum(R, gamma, schedule=POW2, jmax=None):
    """``sum_{j>=1} (1+N(j)) 2^(-gamma N(j-1)/R)``, summed until terms vanish."""
    total, j = 0.0, 1
    while True:
        term = (1 + schedule(j)) * 2.0 ** (-gamma * schedule(j - 1) / R)
        total += term
        if (jmax is not None and j >= jmax) or (jmax is None and term < 1e-17 * total):
            break
        j += 1
    return total


def geometric_sum_majorant(gamma):
    """Constant ``C = 3 + 6/(gamma ln 2)`` with ``geometric_sum(R, gamma) <= C R`` for ``R >= 1``.

    The ``j = 1`` term is 3 for every ``R``. For ``j >= 2`` write ``t = 2^(j-1)``
    and ``a = gamma ln2 / R``, so the rest is ``sum_t (1 + 2t) e^(-a t)`` over
    powers of two ``t >= 1``. Comparing each term with the integral of
    ``e^(-a u)`` over ``[t/2, t]`` gives ``sum_t e^(-a t) <= 2/a`` and
    ``sum_t t e^(-a t) <= 2/a``. Since ``R >= 1``, ``3 <= 3R``.
    The bound fails for small ``R``, which never occurs for ``R = (w)_{A_p}``.
    """
    return 3.0 + 6.0 / (gamma * math.log(2.0))


def interpolation_consistency_experiment(b, omega, j, p=2.0, w=None, c_n=1.0,
                                         family=None, side="low", trials=1, seed=0,
                                         schedule=POW2, krange=None, tol=1e-7,
                                         gamma=None):
    """Measured ``L^p(w)`` norm of a ``j``-piece against the interpolated bound.

    ``k0`` is the unweighted norm, ``k1`` the norm in ``L^p(w^(1+eps))`` with
    ``eps = c_n / (2 (w)_{A_p})``; the bound is the proof-variant combination.
    """
    spec = b.b.spec
    w = unit_weight(spec.n) if w is None else w
    if family is None:
        from .weights import make_family
        family = make_family(spec)
    rep = ap_report(w, p, family)
    eps = epsilon_of(rep, c_n)
    T = _band_op(b, omega, j, side, schedule, krange)
    if isinstance(w, PowerWeight):
        w1 = PowerWeight(w.alpha * (1 + eps), w.n)
    else:
        from .weights import SampledWeight
        w1 = SampledWeight(GridFunction(spec, w.on_grid(spec) ** (1 + eps)), "w^(1+eps)")
    seen = {}

    def measure(wt):
        # the unit weight (and alpha = 0 powers) repeat; measure each once
        key = "unit" if wt is None or (isinstance(wt, PowerWeight) and wt.alpha == 0) \
            else repr(sorted(wt.descriptor().items()))
        if key not in seen:
            seen[key] = opnorm(T, p, wt, trials, seed, tol=tol)
        return seen[key]

    k0 = measure(None)
    k1 = measure(w1)
    meas = measure(w)
    comb = sw1_combine(k0.value, k1.value, eps, "proof") if k0.value > 0 and k1.value > 0 else 0.0
    out = {"j": j, "side": side, "eps": eps, "round": rep.round, "curly": rep.curly,
           "k0": k0.value, "k1": k1.value, "measured": meas.value, "combined": comb,
           "ratio": meas.value / comb if comb > 0 else 0.0,
           "holds": meas.value <= comb * (1 + 10 * tol)}
    if gamma is not None:
        R = rep.round
        out["geometric_sum"] = geometric_sum(R, gamma, schedule)
        out["geometric_bound"] = geometric_sum_majorant(gamma) * R
    return out
