"""Littlewood-Paley pieces on the lattice.

The radial profile ``eta`` equals 1 on ``[0, 1/2]``, 0 on ``[1, inf)`` and
in between is the normalized integral of the bump ``exp(-1/(1-t^2))`` after
the affine change ``t = 4r - 3``. With ``phi_hat(xi) = eta(|xi|)`` and
``psi_hat = (phi_hat(xi) - phi_hat(2 xi))^(1/3)``:

* ``S_j`` multiplies by ``phi_hat(2^j xi)``;
* ``Delta_j`` (power ``p``) multiplies by ``psi_hat(2^j xi)^p``.

So large ``j`` means low frequency, and ``S_j - S_{j+1} = Delta_j^3``.
"""
from dataclasses import dataclass
from functools import lru_cache
import warnings

import numpy as np
import scipy.fft as sfft

from .grid import GridFunction

__all__ = [
    "MollifierProfile", "JumpSchedule", "DEFAULT_PROFILE", "POW2", "phi_hat",
    "psi_hat", "partial_sum", "delta_j", "band_sum", "band_multiplier",
    "resolvable_range", "square_function_commutator_check",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def _bump(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _bump_integral(u):
    """``int_{-1}^{u} exp(-1/(1-t^2)) dt`` by Gauss-Legendre on ``[-1, u]``."""
    u = np.asarray(u, dtype=float)
    half = (u + 1.0) / 2.0
    t = -1.0 + half[..., None] * (_GL_X + 1.0)
    return half * (_bump(t) @ _GL_W)


def _bump_tail(u):
    """``int_{u}^{1} exp(-1/(1-t^2)) dt``; by symmetry of the bump this is the head at ``-u``."""
    return _bump_integral(-np.asarray(u, dtype=float))


_BUMP_TOTAL = float(_bump_integral(np.array(1.0)))


@dataclass(frozen=True)
class MollifierProfile:
    """Smooth radial cutoff with plateau ``1/2`` and cutoff 1.

    ``psi_sign`` exists only so the self-test can inject a sign fault into
    ``psi_hat``; every other caller keeps the default.
    """

    plateau: float = 0.5
    cutoff: float = 1.0
    psi_sign: float = 1.0

    def eta(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r <= self.plateau, 1.0, 0.0)
        mid = (r > self.plateau) & (r < self.cutoff)
        if np.any(mid):
            u = -1.0 + 2.0 * (r[mid] - self.plateau) / (self.cutoff - self.plateau)
            # integrate over the shorter side to avoid cancellation
            out[mid] = np.where(u < 0, 1.0 - _bump_integral(u) / _BUMP_TOTAL,
                                _bump_tail(u) / _BUMP_TOTAL)
        return np.clip(out, 0.0, 1.0)

    def phi(self, rad):
        return self.eta(rad)

    def psi(self, rad):
        rad = np.asarray(rad, dtype=float)
        d = np.maximum(self.eta(rad) - self.eta(2.0 * rad), 0.0)
        return self.psi_sign * np.cbrt(d)


DEFAULT_PROFILE = MollifierProfile()


@dataclass(frozen=True)
class JumpSchedule:
    """Strictly increasing ``N`` with ``N(0)=0``.

    ``kind="pow2"`` gives ``N(j) = 2^j`` for ``j >= 1``; ``kind="table"``
    reads explicit values ``(0, N(1), N(2), ...)``.
    """

    kind: str = "pow2"
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "table":
            t = tuple(int(v) for v in self.table)
            if not t or t[0] != 0 or any(b <= a for a, b in zip(t, t[1:])):
                raise ValueError("schedule table must start at 0 and increase strictly")
            object.__setattr__(self, "table", t)
        elif self.kind != "pow2":
            raise ValueError(f"unknown schedule {self.kind!r}")

    def __call__(self, j):
        if j < 0:
            raise ValueError("schedule is defined for j >= 0")
        if self.kind == "pow2":
            return 0 if j == 0 else 2 ** j
        return self.table[j]

    @classmethod
    def parse(cls, spec):
        if spec in (None, "pow2"):
            return POW2
        return cls("table", tuple(spec))


POW2 = JumpSchedule()


def phi_hat(xi, profile=DEFAULT_PROFILE):
    """``eta(|xi|)``; ``xi`` is a radius (array) or a tuple of component arrays."""
    return profile.phi(_radius(xi))


def psi_hat(xi, profile=DEFAULT_PROFILE):
    return profile.psi(_radius(xi))


def _radius(xi):
    if isinstance(xi, tuple):
        return np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in xi))
    return np.abs(np.asarray(xi, dtype=float))


@lru_cache(maxsize=512)
def _rad_table(spec):
    r = spec.freq_radius()
    r.setflags(write=False)
    return r


@lru_cache(maxsize=2048)
def _phi_table(spec, j, profile):
    v = profile.phi(2.0 ** j * _rad_table(spec))
    v.setflags(write=False)
    return v


@lru_cache(maxsize=2048)
def _psi_table(spec, j, power, profile):
    v = profile.psi(2.0 ** j * _rad_table(spec)) ** power
    v.setflags(write=False)
    return v


def phi_multiplier(spec, j, profile=DEFAULT_PROFILE):
    return _phi_table(spec, int(j), profile)


def psi_multiplier(spec, j, power=1, profile=DEFAULT_PROFILE):
    return _psi_table(spec, int(j), int(power), profile)


def resolvable_range(spec):
    """Indices ``j`` whose annulus ``1/2 <= 2^j |xi| <= 2`` meets the lattice."""
    rad = _rad_table(spec)
    rmin = np.pi / spec.L
    rmax = float(rad.max())
    lo = int(np.floor(np.log2(0.5 / rmax)))
    hi = int(np.ceil(np.log2(2.0 / rmin)))
    return lo, hi


def _apply(f, m):
    return GridFunction(f.spec, sfft.ifftn(sfft.fftn(f.values) * m))


def partial_sum(f, j, profile=DEFAULT_PROFILE):
    """``S_j f``, the multiplier ``phi_hat(2^j xi)``."""
    m = phi_multiplier(f.spec, j, profile)
    if np.all(m == 1.0) or np.all(m[1:] == 0.0 if f.spec.n == 1 else m.ravel()[1:] == 0.0):
        warnings.warn(f"S_{j} is not resolved on this grid", RuntimeWarning, stacklevel=2)
    return _apply(f, m)


def delta_j(f, j, power=3, profile=DEFAULT_PROFILE):
    """``Delta_j f`` with multiplier ``psi_hat(2^j xi)^power``."""
    if power not in (1, 2, 3):
        raise ValueError("power must be 1, 2 or 3")
    return _apply(f, psi_multiplier(f.spec, j, power, profile))


def _band_indices(k, j, side, schedule):
    lo, hi = schedule(j - 1) + 1, schedule(j)
    if side == "low":
        return [k - i for i in range(lo, hi + 1)]
    if side == "high":
        return [k + i - 1 for i in range(lo, hi + 1)]
    raise ValueError(f"side must be 'low' or 'high', got {side!r}")


def band_multiplier(spec, k, j, side, schedule=POW2, profile=DEFAULT_PROFILE):
    """Frequency multiplier of the band ``B_{k,j}`` as a sum of cubed pieces.

    low side: ``S_{k-N(j)} - S_{k-N(j-1)}``;
    high side: ``S_{k+N(j-1)} - S_{k+N(j)}``.
    Pieces whose annulus misses the lattice are identically zero and skipped.
    """
    lo, hi = resolvable_range(spec)
    out = np.zeros(spec.shape)
    for m in _band_indices(k, j, side, schedule):
        if lo <= m <= hi:
            out += psi_multiplier(spec, m, 3, profile)
    return out


def band_sum(f, k, j, side, schedule=POW2, profile=DEFAULT_PROFILE):
    return _apply(f, band_multiplier(f.spec, k, j, side, schedule, profile))


def square_function_commutator_check(b, f, p=2.0, jrange=None, power=1,
                                     profile=DEFAULT_PROFILE):
    """Norm of ``(sum_j 2^{-2j} |[b, Delta_j] f|^2)^{1/2}`` against ``|grad b| |f|_p``.

    Parameters
    ----------
    b : LipschitzSymbol
        Sampled Lipschitz function with its gradient bound.
    f : GridFunction
    jrange : tuple of int, optional
        Inclusive range of ``j``; defaults to every resolvable index.

    Returns
    -------
    dict
        ``square_norm``, ``reference`` and their ``ratio``.
    """
    from .grid import lp_norm

    spec = f.spec
    if jrange is None:
        jrange = resolvable_range(spec)
    bv = b.b.values
    acc = np.zeros(spec.shape)
    Ff = sfft.fftn(f.values)
    Fbf = sfft.fftn(bv * f.values)
    for j in range(jrange[0], jrange[1] + 1):
        m = psi_multiplier(spec, j, power, profile)
        c = bv * sfft.ifftn(Ff * m) - sfft.ifftn(Fbf * m)
        acc += 2.0 ** (-2 * j) * np.abs(c) ** 2
    sq = lp_norm(GridFunction(spec, np.sqrt(acc)), p)
    ref = b.grad_bound * lp_norm(f, p)
    return {"square_norm": sq, "reference": ref,
            "ratio": sq / ref if ref > 0 else 0.0, "jrange": tuple(jrange)}
