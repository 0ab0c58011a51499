"""Kernel bands, truncated singular integrals and Calderon commutators.

A band ``K_k`` is ``Omega(x')/|x|^d`` on the shell ``2^k < |x| <= 2^{k+1}``,
sampled at lattice points and cut at ``|x| < L/2``. Every operator here is a
lattice convolution, applied through its multiplier
``m = h^n * fft(K)``, which approximates the continuous transform
``int K(x) exp(-i xi.x) dx``. Commutators use the two-term form
``b T f - T(b f)``.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .grid import GridFunction, make_grid
from .lp import DEFAULT_PROFILE, POW2, band_multiplier
from .sphere import check_cancellation, lq_norm

__all__ = [
    "LipschitzSymbol", "KernelBand", "BandOperator", "MultiplierTable",
    "linear_symbol", "default_krange", "realize_kernel", "khat", "apply_band",
    "apply_T_eps", "commutator_band", "apply_C", "band_tails",
    "apply_comm_T1jN", "apply_comm_T2jN", "comm_multiplier", "multiplier_table",
    "annulus_grid", "kernel_estimate_check", "make_sampleset", "dini_modulus",
    "dini_norm", "window", "second_derivative_ratio",
]


class OperatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Lipschitz symbols

@dataclass(frozen=True, eq=False)
class LipschitzSymbol:
    """Real lattice samples ``b`` with an analytic bound on ``|grad b|``."""

    b: GridFunction
    grad_bound: float
    label: str = "sampled"

    def __post_init__(self):
        v = self.b.values
        if np.any(v.imag != 0):
            raise OperatorError("b must be real")
        if self.grad_bound < 0:
            raise OperatorError("gradient bound must be nonnegative")
        g = discrete_gradient_max(self.b)
        if g > 1.05 * self.grad_bound + 1e-12:
            raise OperatorError(
                f"discrete gradient {g:.4g} exceeds 1.05 x bound {self.grad_bound:.4g}")

    @property
    def values(self):
        return self.b.values.real

    def scaled(self, c):
        return LipschitzSymbol(self.b * c, abs(c) * self.grad_bound, self.label)


def discrete_gradient_max(b):
    """Largest forward difference quotient, skipping the periodic seam."""
    spec = b.spec
    v = b.values.real
    seam = spec.M // 2 - 1  # last nonnegative-coordinate index before the wrap
    best = 0.0
    for ax in range(spec.n):
        d = (np.roll(v, -1, axis=ax) - v) / spec.h
        d = np.delete(d, seam, axis=ax)
        if d.size:
            best = max(best, float(np.abs(d).max()))
    return best


def linear_symbol(spec, direction):
    """``b(x) = e.x`` with ``|grad b| = |e|``; non-periodic, exact on the window."""
    e = np.asarray(direction, dtype=float).ravel()
    if e.size != spec.n:
        raise OperatorError("direction length must equal the dimension")
    coords = spec.coords()
    v = sum(ei * c for ei, c in zip(e, coords))
    return LipschitzSymbol(GridFunction(spec, v), float(np.linalg.norm(e)), "linear")


def _bvals(b):
    if b is None:
        return None
    if isinstance(b, LipschitzSymbol):
        return b.values
    if isinstance(b, GridFunction):
        return b.values
    return np.asarray(b)


# ---------------------------------------------------------------------------
# kernel realization

def default_krange(spec):
    """``(k_min, k_max)``: the innermost shell starts at or beyond ``h``, the
    outermost shell starts below ``L/2``."""
    kmin = math.ceil(math.log2(spec.h) - 1e-12)
    kmax = math.ceil(math.log2(spec.L / 2) - 1e-12) - 1
    return kmin, kmax


def realize_kernel(spec, omega, r_lo, r_hi, degree, inclusive_hi=True):
    """``Omega(x')/|x|^degree`` on lattice points with ``r_lo < |x| <= r_hi``,
    further restricted to ``|x| < L/2``."""
    if omega.n != spec.n:
        raise OperatorError("symbol and grid dimensions differ")
    r = spec.radius()
    mask = (r > r_lo) & (r < spec.L / 2)
    mask &= (r <= r_hi) if inclusive_hi else (r < r_hi)
    K = np.zeros(spec.shape)
    c = spec.coords()
    if spec.n == 1:
        om = omega.evaluate(c[0][mask])
    else:
        om = omega.evaluate(c[0][mask], c[1][mask])
    K[mask] = om / r[mask] ** degree
    return K


@dataclass(frozen=True, eq=False)
class KernelBand:
    """The band ``K_k`` of ``Omega/|x|^degree`` on a given grid.

    ``eps`` (optional) additionally removes lattice points with ``|x| <= eps``.
    """

    k: int
    omega: object
    degree: int
    spec: object
    eps: float = 0.0

    @property
    def r_lo(self):
        return max(2.0 ** self.k, self.eps)

    @property
    def r_hi(self):
        return 2.0 ** (self.k + 1)

    def realization(self):
        return _band_real(self)

    def multiplier(self):
        return _band_mult(self)


_cache = {}


def _okey(omega):
    return (omega.n, omega.values.tobytes())


def _memo(key, fn):
    if key not in _cache:
        if len(_cache) > 256:
            _cache.clear()
        v = fn()
        if isinstance(v, np.ndarray):
            v.setflags(write=False)
        _cache[key] = v
    return _cache[key]


def _band_real(band):
    key = ("real", band.spec, band.k, _okey(band.omega), band.degree, band.eps)
    return _memo(key, lambda: realize_kernel(band.spec, band.omega, band.r_lo,
                                             band.r_hi, band.degree))


def _band_mult(band):
    key = ("mult", band.spec, band.k, _okey(band.omega), band.degree, band.eps)
    return _memo(key, lambda: band.spec.h ** band.spec.n * sfft.fftn(_band_real(band)))


def _conv(values, m):
    return sfft.ifftn(sfft.fftn(values) * m)


def _check_grid(band, f):
    if band.spec != f.spec:
        raise OperatorError("band realized on a different grid")


def apply_band(band, f):
    """``T_k f = K_k * f`` computed on the frequency side."""
    _check_grid(band, f)
    return GridFunction(f.spec, _conv(f.values, band.multiplier()))


def _truncated_multiplier(spec, omega, eps, degree, r_hi=None):
    r_hi = spec.L if r_hi is None else r_hi
    key = ("trunc", spec, _okey(omega), float(eps), degree, r_hi)
    return _memo(key, lambda: spec.h ** spec.n * sfft.fftn(
        realize_kernel(spec, omega, eps, r_hi, degree)))


def apply_T_eps(omega, f, eps, degree=None):
    """``int_{|y|>eps} Omega(y')/|y|^degree f(x-y) dy`` with support below ``L/2``."""
    spec = f.spec
    degree = spec.n if degree is None else degree
    if degree not in (spec.n, spec.n + 1):
        raise OperatorError("degree must be n or n+1")
    if eps < spec.h * (1 - 1e-12):
        raise OperatorError(f"eps={eps} is below the grid spacing {spec.h}")
    return GridFunction(spec, _conv(f.values, _truncated_multiplier(spec, omega, eps, degree)))


def _commute(bv, values, m):
    return bv * _conv(values, m) - _conv(bv * values, m)


def commutator_band(b, band, f):
    """``[b, T_k] f = b T_k f - T_k(b f)``."""
    _check_grid(band, f)
    return GridFunction(f.spec, _commute(_bvals(b), f.values, band.multiplier()))


def _bands(spec, omega, krange, degree):
    kmin, kmax = default_krange(spec) if krange is None else krange
    return [KernelBand(k, omega, degree, spec) for k in range(kmin, kmax + 1)]


def C_multiplier(spec, omega, krange=None, degree=None):
    """Sum of band multipliers over ``krange``; equals the transform of the
    kernel on ``2^kmin < |x| <= 2^(kmax+1)``, ``|x| < L/2``."""
    degree = spec.n + 1 if degree is None else degree
    kmin, kmax = default_krange(spec) if krange is None else krange
    key = ("C", spec, _okey(omega), kmin, kmax, degree)
    return _memo(key, lambda: sum(b.multiplier() for b in _bands(spec, omega, (kmin, kmax), degree)))


def apply_C(b, omega, f, krange=None, require_cancellation=False):
    """``sum_k [b, T_k] f`` over the shells of ``krange``."""
    if require_cancellation and not check_cancellation(omega):
        raise OperatorError("Omega fails the cancellation condition")
    m = C_multiplier(f.spec, omega, krange)
    return GridFunction(f.spec, _commute(_bvals(b), f.values, m))


def band_tails(b, omega, f, krange=None):
    """Per-band norms ``||[b, T_k] f||_2`` keyed by ``k``."""
    from .grid import lp_norm
    out = {}
    for band in _bands(f.spec, omega, krange, f.spec.n + 1):
        out[band.k] = lp_norm(commutator_band(b, band, f), 2)
    return out


def comm_multiplier(spec, omega, j, side, schedule=POW2, krange=None,
                    profile=DEFAULT_PROFILE):
    """Multiplier of ``T_{side,j}^N = sum_k T_k B_{k,j}``."""
    kmin, kmax = default_krange(spec) if krange is None else krange
    key = ("Tj", spec, _okey(omega), j, side, schedule, kmin, kmax, profile)

    def build():
        acc = np.zeros(spec.shape, dtype=complex)
        for band in _bands(spec, omega, (kmin, kmax), spec.n + 1):
            acc += band.multiplier() * band_multiplier(spec, band.k, j, side, schedule, profile)
        return acc

    return _memo(key, build)


def apply_comm_T1jN(b, omega, f, j, schedule=POW2, krange=None):
    """``[b, T_{1,j}^N] f`` (low side)."""
    m = comm_multiplier(f.spec, omega, j, "low", schedule, krange)
    return GridFunction(f.spec, _commute(_bvals(b), f.values, m))


def apply_comm_T2jN(b, omega, f, j, schedule=POW2, krange=None, require_cancellation=True):
    """``[b, T_{2,j}^N] f`` (high side); needs the cancellation condition."""
    if require_cancellation and not check_cancellation(omega):
        raise OperatorError("the high-side pieces require the cancellation condition")
    m = comm_multiplier(f.spec, omega, j, "high", schedule, krange)
    return GridFunction(f.spec, _commute(_bvals(b), f.values, m))


# ---------------------------------------------------------------------------
# matrix-free operator handle

def window(spec, frac=0.25):
    """Indicator of the box ``|x|_inf <= frac * L`` (default ``L/4``)."""
    c = spec.coords()
    inside = np.ones(spec.shape, dtype=bool)
    for x in c:
        inside &= np.abs(x) <= frac * spec.L + 1e-12
    return inside.astype(float)


class BandOperator:
    """``f -> [b, T] (P f)`` or ``f -> T (P f)`` for a lattice multiplier ``T``.

    Parameters
    ----------
    spec : GridSpec
    multiplier : ndarray
        Multiplier of ``T`` on the frequency lattice.
    b : LipschitzSymbol, optional
        When given the operator is the commutator with ``b``.
    win : ndarray, optional
        Real window ``P`` applied before the operator.
    """

    def __init__(self, spec, multiplier, b=None, win=None, name="T"):
        self.spec = spec
        self.m = np.asarray(multiplier)
        self.mc = np.conj(self.m)
        self.bv = None if b is None else np.asarray(_bvals(b)).real
        self.win = win
        self.name = name

    def apply(self, v):
        if self.win is not None:
            v = v * self.win
        if self.bv is None:
            return _conv(v, self.m)
        return _commute(self.bv, v, self.m)

    def adjoint(self, g):
        if self.bv is None:
            out = _conv(g, self.mc)
        else:
            out = _conv(self.bv * g, self.mc) - self.bv * _conv(g, self.mc)
        if self.win is not None:
            out = out * self.win
        return out

    def __call__(self, f):
        return GridFunction(f.spec, self.apply(f.values))

    def scaled(self, c):
        op = BandOperator(self.spec, self.m * c, None, self.win, f"{c}*{self.name}")
        op.bv = self.bv
        return op


def identity(spec):
    return BandOperator(spec, np.ones(spec.shape), name="I")


# ---------------------------------------------------------------------------
# band Fourier transforms by quadrature

def _gl(nr, a, b):
    x, w = np.polynomial.legendre.leggauss(nr)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def khat(band, xi, nr=None, nt=None, use_numba=None):
    """Continuous transform of the band by Gauss-Legendre x trapezoid quadrature.

    ``K_hat(xi) = int_{2^k}^{2^(k+1)} r^(n-1-d) int_S Omega(u) exp(-i r xi.u) du dr``
    with angular frequency ``xi``.

    Parameters
    ----------
    band : KernelBand
        Only ``k``, ``omega`` and ``degree`` are used; the grid is ignored.
    xi : array_like, shape (N, n) or (n,)
    nr, nt : int, optional
        Radial and angular node counts; chosen from the largest phase if omitted.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    n = band.omega.n
    if xi.shape[1] != n:
        raise OperatorError("frequency dimension mismatch")
    a, b = 2.0 ** band.k, 2.0 ** (band.k + 1)
    phase = b * float(np.sqrt((xi ** 2).sum(axis=1)).max(initial=0.0))
    if nr is None:
        nr = int(24 + 0.6 * phase)
    r, wr = _gl(nr, a, b)
    wr = wr * r ** (n - 1 - band.degree)
    if n == 1:
        ux = np.array([1.0, -1.0])
        uy = np.zeros(2)
        at = band.omega.values.astype(float)
        xi2 = np.column_stack([xi[:, 0], np.zeros(len(xi))])
    else:
        if nt is None:
            nt = 2 * (band.omega.S // 2 + int(phase) + 24)
        th = 2 * np.pi * np.arange(nt) / nt
        ux, uy = np.cos(th), np.sin(th)
        at = band.omega.at_angle(th) * (2 * np.pi / nt)
        xi2 = xi
    return _kernels.polar_fourier_sum(xi2, r, wr, ux, uy, at, use_numba)


@dataclass(frozen=True, eq=False)
class MultiplierTable:
    """``m_{i,k}`` (low side) or ``m~_{i,k}`` (high side) on a frequency lattice."""

    i: int
    k: int
    side: str
    spec: object
    values: np.ndarray

    def annulus(self):
        """Boolean mask of lattice frequencies inside the piece's annulus."""
        s = _annulus_scale(self.i, self.k, self.side)
        r = s * self.spec.freq_radius()
        return (r >= 0.5) & (r <= 2.0)


def _annulus_scale(i, k, side):
    # psi_hat(2^s xi) with s = k - i (low) or k + i (high)
    if side == "low":
        return 2.0 ** (k - i)
    if side == "high":
        return 2.0 ** (k + i)
    raise OperatorError(f"side must be 'low' or 'high', got {side!r}")


def annulus_grid(i, k, side, M=64):
    """A 2D lattice whose frequency box just contains the piece's annulus."""
    outer = 2.0 / _annulus_scale(i, k, side)
    h = np.pi / (1.05 * outer)
    return make_grid(2, M, M * h / 2)


def multiplier_table(omega, i, k, side, profile=DEFAULT_PROFILE, spec=None, degree=None):
    """Tabulate ``K_hat_k(xi) psi_hat(2^(k-+i) xi)`` on a frequency lattice."""
    spec = annulus_grid(i, k, side) if spec is None else spec
    degree = spec.n + 1 if degree is None else degree
    s = _annulus_scale(i, k, side)
    rad = spec.freq_radius()
    ps = profile.psi(s * rad)
    vals = np.zeros(spec.shape, dtype=complex)
    nz = ps != 0
    if np.any(nz):
        xi = np.stack([f[nz] for f in spec.freqs()], axis=1)
        vals[nz] = khat(KernelBand(k, omega, degree, spec), xi) * ps[nz]
    return MultiplierTable(i, k, side, spec, vals)


def second_derivative_ratio(omega, i, k, side, profile=DEFAULT_PROFILE, npts=48, seed=0):
    """``max |d^2 m_{i,k}| / (2^k ||Omega||_1)`` by central differences.

    Points are drawn on the annulus; the step is 1% of the local variation
    scale ``min(annulus radius, 2^-k)``.
    """
    rng = np.random.default_rng(seed)
    s = _annulus_scale(i, k, side)
    rad = rng.uniform(0.55, 1.95, npts) / s
    ang = rng.uniform(0, 2 * np.pi, npts)
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    delta = 0.01 * min(0.5 / s, 2.0 ** (-k))
    band = KernelBand(k, omega, 3, None)

    def m(x):
        r = np.sqrt((x ** 2).sum(axis=1))
        return khat(band, x) * profile.psi(s * r)

    e = np.eye(2) * delta
    m0 = m(pts)
    hmax = np.zeros(npts)
    for a in range(2):
        for c in range(a, 2):
            if a == c:
                d2 = (m(pts + e[a]) - 2 * m0 + m(pts - e[a])) / delta ** 2
            else:
                d2 = (m(pts + e[a] + e[c]) - m(pts + e[a] - e[c])
                      - m(pts - e[a] + e[c]) + m(pts - e[a] - e[c])) / (4 * delta ** 2)
            hmax = np.maximum(hmax, np.abs(d2))
    return float(hmax.max() / (2.0 ** k * lq_norm(omega, 1)))


# ---------------------------------------------------------------------------
# kernel size and smoothness of the band pieces

def dini_modulus(N, omega_norm=1.0, grad_norm=1.0):
    """``t -> |Omega| |grad b| min(1, 2^N t)``."""
    c = float(omega_norm) * float(grad_norm)
    s = 2.0 ** N

    def omega_t(t):
        return c * np.minimum(1.0, s * np.asarray(t, dtype=float))

    return omega_t


def dini_norm(N, omega_norm=1.0, grad_norm=1.0):
    """``int_0^1 omega(t) dt/t = |Omega| |grad b| (1 + N ln 2)``."""
    if N < 0:
        raise OperatorError("N must be nonnegative")
    return float(omega_norm) * float(grad_norm) * (1.0 + N * math.log(2.0))


def make_sampleset(spec, count=200, seed=0, min_cells=4, max_frac=0.125, steps=None):
    """Random ``(x, y, h)`` lattice triples with ``2|h| <= |x-y|``.

    Parameters
    ----------
    steps : sequence of int, optional
        If given, every base pair ``(x, y)`` is repeated with ``h`` equal to
        ``(x-y)/2^m`` rounded to the lattice for each ``m`` in ``steps``.

    Returns
    -------
    ndarray of int64, shape (count, 3, n)
        Physical cell offsets from the origin.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    quarter = int(spec.M // 8)
    dmax = max(min_cells + 1, int(max_frac * spec.M))
    out = []
    while len(out) < count:
        x = rng.integers(-quarter, quarter + 1, n)
        d = rng.integers(-dmax, dmax + 1, n)
        rd = float(np.sqrt((d ** 2).sum()))
        if rd < min_cells or rd > dmax:
            continue
        y = x - d
        if steps is None:
            hv = np.rint(d * rng.uniform(-0.5, 0.5) * rng.uniform(0.05, 1.0)).astype(int)
            if n == 2:
                hv = hv + rng.integers(-1, 2, n)
            if not 0 < 2 * np.sqrt((hv ** 2).sum()) <= rd:
                continue
            out.append((x, y, hv))
        else:
            for m in steps:
                hv = np.rint(d / 2.0 ** m).astype(int)
                if not hv.any():
                    hv = np.sign(d) * (np.abs(d) == np.abs(d).max())
                out.append((x, y, hv))
    return np.asarray(out[:count] if steps is None else out, dtype=np.int64)


def _kernel_table(spec, omega, j, side, schedule, krange):
    m = comm_multiplier(spec, omega, j, side, schedule, krange)
    return sfft.ifftn(m).real / spec.h ** spec.n


def kernel_estimate_check(b, omega, j, side="low", schedule=POW2, sampleset=None,
                          spec=None, krange=None):
    """Size and smoothness ratios of the kernel of ``[b, T_{side,j}^N]``.

    The kernel is ``K(x,y) = (b(x)-b(y)) kappa_j(x-y)`` with ``kappa_j`` the
    lattice kernel of ``sum_k T_k B_{k,j}``. Norms are chosen per
    side: ``|Omega|_inf`` for the low side, ``|Omega|_1`` for the high side.

    Returns
    -------
    dict
        ``size_ratio`` and ``smooth_ratio`` (maxima), ``size`` and ``smooth``
        (per-sample arrays), ``N`` and the norms used.
    """
    spec = b.b.spec if spec is None else spec
    if sampleset is None:
        sampleset = make_sampleset(spec)
    S = np.asarray(sampleset, dtype=np.int64)
    x, y, hv = S[:, 0], S[:, 1], S[:, 2]
    d = x - y
    rd = np.sqrt((d ** 2).sum(axis=1)) * spec.h
    rh = np.sqrt((hv ** 2).sum(axis=1)) * spec.h
    if np.any(2 * rh > rd + 1e-12):
        raise OperatorError("sample violates 2|h| <= |x-y|")
    kap = _kernel_table(spec, omega, j, side, schedule, krange)
    bv = b.values
    M = spec.M

    def at(arr, idx):
        idx = np.mod(idx, M)
        return arr[tuple(idx.T)]

    def K(xx, yy):
        return (at(bv, xx) - at(bv, yy)) * at(kap, xx - yy)

    N = schedule(j)
    onorm = lq_norm(omega, np.inf) if side == "low" else lq_norm(omega, 1)
    gnorm = b.grad_bound
    scale = onorm * gnorm
    n = spec.n
    k0 = K(x, y)
    dk = np.maximum(np.abs(K(x, y + hv) - k0), np.abs(k0 - K(x + hv, y)))
    if scale == 0:
        size = np.zeros(len(S))
        smooth = np.zeros(len(S))
    else:
        size = np.abs(k0) * rd ** n / scale
        smooth = dk * rd ** n / dini_modulus(N, onorm, gnorm)(rh / rd)
    return {"N": N, "omega_norm": onorm, "grad_norm": gnorm,
            "size": size, "smooth": smooth,
            "size_ratio": float(size.max()), "smooth_ratio": float(smooth.max())}
