"""Muckenhoupt characteristics of lattice weights.

Cubes live in *physical* index space: after ``fftshift`` the cell with index
``(M/2, ..., M/2)`` is centred at the origin and a cube is given by its lower
corner and side in cells. Averages are cell averages, so a power weight is
sampled as exact (1D) or high-order (2D) cell means of ``|x|^alpha`` rather
than point values; this keeps the origin cell finite and makes centred
interval averages agree with the closed forms.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import hashlib
import json

import numpy as np
from scipy import integrate, optimize

from . import _kernels
from .grid import GridFunction, GridSpec

__all__ = [
    "Weight", "PowerWeight", "SampledWeight", "CubeFamily", "ApReport",
    "unit_weight", "dual_weight", "make_family", "centered_family",
    "ap_characteristic", "ainfty_fujii_wilson", "report", "epsilon_of",
    "power_interval_average", "power_interval_ap", "centered_interval_ap",
    "power_ap_sup_1d",
]


class WeightError(ValueError):
    pass


def _conj(p):
    return p / (p - 1.0)


class Weight:
    """Base class; subclasses provide :meth:`on_grid` and :meth:`descriptor`."""

    def on_grid(self, spec):
        raise NotImplementedError

    def descriptor(self):
        raise NotImplementedError

    def scaled(self, c):
        return ScaledWeight(self, float(c))


@dataclass(frozen=True)
class PowerWeight(Weight):
    """``w(x) = |x|^alpha`` in dimension ``n``, sampled as cell averages."""

    alpha: float
    n: int = 2

    def on_grid(self, spec):
        if spec.n != self.n:
            raise WeightError("weight and grid dimensions differ")
        return _power_cells(spec, float(self.alpha))

    def descriptor(self):
        return {"type": "power", "alpha": float(self.alpha), "n": self.n}

    def admissible(self, p):
        return -self.n < self.alpha < self.n * (p - 1)


@dataclass(frozen=True, eq=False)
class SampledWeight(Weight):
    """Positive lattice samples in lattice (FFT) order."""

    values: GridFunction
    label: str = "sampled"

    def __post_init__(self):
        v = self.values.values
        if np.any(np.abs(v.imag) > 0) or np.any(v.real <= 0):
            raise WeightError("sampled weight must be real and positive")

    def on_grid(self, spec):
        if spec != self.values.spec:
            raise WeightError("weight sampled on a different grid")
        return self.values.values.real

    def descriptor(self):
        v = np.ascontiguousarray(self.values.values.real)
        return {"type": "sampled", "label": self.label,
                "sha256": hashlib.sha256(v.tobytes()).hexdigest()[:16]}


@dataclass(frozen=True, eq=False)
class ScaledWeight(Weight):
    base: Weight
    c: float

    def on_grid(self, spec):
        return self.c * self.base.on_grid(spec)

    def descriptor(self):
        return {"type": "scaled", "c": self.c, "base": self.base.descriptor()}


def unit_weight(n=2):
    return PowerWeight(0.0, n)


def dual_weight(w, p):
    """``w^(1-p')``; power weights stay in closed form."""
    if p <= 1:
        raise WeightError("p must exceed 1")
    e = 1.0 - _conj(p)
    if isinstance(w, PowerWeight):
        return PowerWeight(w.alpha * e, w.n)
    spec = w.values.spec if isinstance(w, SampledWeight) else None
    if spec is None:
        raise WeightError("dual of a derived weight needs sampled values")
    with np.errstate(over="raise", divide="raise"):
        try:
            v = w.on_grid(spec) ** e
        except FloatingPointError as exc:
            raise WeightError("dual weight overflows") from exc
    if not np.all(np.isfinite(v)) or np.any(v == 0):
        raise WeightError("dual weight overflows")
    return SampledWeight(GridFunction(spec, v), label=f"dual({w.descriptor().get('label', 'w')})")


# ---------------------------------------------------------------------------
# power-weight cell averages

_G4, _GW4 = np.polynomial.legendre.leggauss(4)


def _origin_cell_2d(h, alpha):
    # mean of |x|^alpha over [-h/2, h/2]^2 in polar form, 8 congruent triangles
    a = h / 2.0
    ang, _ = integrate.quad(lambda t: np.cos(t) ** (-(alpha + 2.0)), 0.0, np.pi / 4)
    return 8.0 * a ** (alpha + 2.0) * ang / ((alpha + 2.0) * h * h)


@lru_cache(maxsize=64)
def _power_cells(spec, alpha):
    if alpha == 0.0:
        v = np.ones(spec.shape)
        v.setflags(write=False)
        return v
    if alpha <= -spec.n:
        raise WeightError(f"|x|^{alpha} is not locally integrable in dimension {spec.n}")
    h = spec.h
    x = spec.axis()
    if spec.n == 1:
        def F(t):
            return np.sign(t) * np.abs(t) ** (alpha + 1.0) / (alpha + 1.0)
        v = (F(x + h / 2) - F(x - h / 2)) / h
    else:
        X, Y = spec.coords()
        v = np.zeros(spec.shape)
        for gx, wx in zip(_G4, _GW4):
            for gy, wy in zip(_G4, _GW4):
                r = np.hypot(X + gx * h / 2, Y + gy * h / 2)
                v += 0.25 * wx * wy * r ** alpha
        v[0, 0] = _origin_cell_2d(h, alpha)
    v.setflags(write=False)
    return v


# ---------------------------------------------------------------------------
# cube families

@dataclass(frozen=True, eq=False)
class CubeFamily:
    """Axis-parallel lattice cubes in physical index space.

    Attributes
    ----------
    spec : GridSpec
    starts : ndarray of int64, shape (ncubes, n)
    sides : ndarray of int64, shape (ncubes,)
    """

    spec: GridSpec
    starts: np.ndarray
    sides: np.ndarray
    hash: str = field(default="")

    def __post_init__(self):
        st = np.ascontiguousarray(self.starts, dtype=np.int64).reshape(-1, self.spec.n)
        sd = np.ascontiguousarray(self.sides, dtype=np.int64).ravel()
        if sd.size == 0:
            raise WeightError("cube family is empty")
        if st.shape[0] != sd.size:
            raise WeightError("starts and sides disagree in length")
        if np.any(sd < 1) or np.any(st < 0) or np.any(st + sd[:, None] > self.spec.M):
            raise WeightError("cube outside the domain")
        st.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "starts", st)
        object.__setattr__(self, "sides", sd)
        digest = hashlib.sha256()
        digest.update(json.dumps(self.spec.descriptor(), sort_keys=True).encode())
        digest.update(st.tobytes())
        digest.update(sd.tobytes())
        object.__setattr__(self, "hash", digest.hexdigest())

    def __len__(self):
        return self.sides.size

    def union(self, other):
        st = np.concatenate([self.starts, other.starts])
        sd = np.concatenate([self.sides, other.sides])
        key = np.concatenate([st, sd[:, None]], axis=1)
        _, idx = np.unique(key, axis=0, return_index=True)
        idx.sort()
        return CubeFamily(self.spec, st[idx], sd[idx])


def _axis_starts(M, c, step):
    return np.arange(0, M - c + 1, step, dtype=np.int64)


def centered_family(spec, max_half=None):
    """Odd-sided cubes centred on the origin cell, half-widths ``0..M/2-1``."""
    M = spec.M
    rmax = M // 2 - 1 if max_half is None else min(max_half, M // 2 - 1)
    r = np.arange(rmax + 1, dtype=np.int64)
    starts = np.repeat((M // 2 - r)[:, None], spec.n, axis=1)
    return CubeFamily(spec, starts, 2 * r + 1)


def make_family(spec, s=None, step_div=3, centered=True):
    """Dyadic sides ``2^e`` within ``[h, 2L]`` (and ``[2^-s, 2^s]`` if ``s`` set),
    translated on a lattice of step ``max(1, side // step_div)`` cells.
    """
    M = spec.M
    starts, sides = [], []
    c = 1
    while c <= M:
        length = c * spec.h
        if s is None or 2.0 ** (-s) <= length <= 2.0 ** s:
            a = _axis_starts(M, c, max(1, c // step_div))
            if spec.n == 1:
                st = a[:, None]
            else:
                A0, A1 = np.meshgrid(a, a, indexing="ij")
                st = np.stack([A0.ravel(), A1.ravel()], axis=1)
            starts.append(st)
            sides.append(np.full(st.shape[0], c, dtype=np.int64))
        c *= 2
    if not sides:
        raise WeightError("no dyadic scale of the family fits the grid")
    fam = CubeFamily(spec, np.concatenate(starts), np.concatenate(sides))
    if centered:
        fam = fam.union(centered_family(spec))
    return fam


def _prefix(a):
    n = a.ndim
    P = np.zeros(tuple(s + 1 for s in a.shape))
    if n == 1:
        P[1:] = np.cumsum(a)
    else:
        P[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    return P


def _cube_sums(P, starts, sides):
    if starts.shape[1] == 1:
        a = starts[:, 0]
        return P[a + sides] - P[a]
    a0, a1 = starts[:, 0], starts[:, 1]
    b0, b1 = a0 + sides, a1 + sides
    return P[b0, b1] - P[a0, b1] - P[b0, a1] + P[a0, a1]


def _physical(w, spec):
    v = np.asarray(w.on_grid(spec), dtype=float)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise WeightError("weight must be positive and finite on the family")
    return np.fft.fftshift(v)


def ap_values(w, p, family):
    """Per-cube ``(avg w)(avg w^(1-p'))^(p-1)``."""
    if p <= 1:
        raise WeightError("p must exceed 1")
    spec = family.spec
    wv = _physical(w, spec)
    sv = _physical(dual_weight(w, p), spec) if isinstance(w, PowerWeight) \
        else wv ** (1.0 - _conj(p))
    vol = family.sides.astype(float) ** spec.n
    aw = _cube_sums(_prefix(wv), family.starts, family.sides) / vol
    asg = _cube_sums(_prefix(sv), family.starts, family.sides) / vol
    return aw * asg ** (p - 1.0)


def ap_characteristic(w, p, family):
    """Largest ``(avg_Q w)(avg_Q sigma)^(p-1)`` over the family.

    This is a lower bound for the supremum over all cubes.
    """
    return float(ap_values(w, p, family).max())


def ainfty_fujii_wilson(w, family, use_numba=None):
    """``max_Q w(Q)^{-1} int_Q M(w chi_Q)`` with the centred discrete maximal function.

    The maximal function at a cell is the largest mean of ``w chi_Q`` over
    centred cubes of half-width ``0..side(Q)//2`` (volume counted in full).
    """
    spec = family.spec
    wv = _physical(w, spec)
    P = _prefix(wv)
    sums = _kernels.fujii_wilson_sums(P, family.starts, family.sides, use_numba)
    mass = _cube_sums(P, family.starts, family.sides)
    return float(np.max(sums / mass))


@dataclass(frozen=True)
class ApReport:
    p: float
    ap: float
    ainf_w: float
    ainf_sigma: float
    round: float
    curly: float
    family_hash: str = ""
    weight: dict = field(default_factory=dict)

    def as_dict(self):
        return {"p": self.p, "ap": self.ap, "ainf_w": self.ainf_w,
                "ainf_sigma": self.ainf_sigma, "round": self.round,
                "curly": self.curly, "family_hash": self.family_hash,
                "weight": self.weight}

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)


def report(w, p, family, use_numba=None):
    """All five constants for ``w`` at exponent ``p`` over ``family``."""
    pp = _conj(p)
    ap = ap_characteristic(w, p, family)
    sigma = dual_weight(w, p) if isinstance(w, (PowerWeight, SampledWeight)) else None
    if sigma is None:
        spec = family.spec
        sigma = SampledWeight(GridFunction(spec, w.on_grid(spec) ** (1.0 - pp)))
    aw = ainfty_fujii_wilson(w, family, use_numba)
    asg = ainfty_fujii_wilson(sigma, family, use_numba)
    rnd = max(aw, asg)
    curly = ap ** (1.0 / p) * max(aw ** (1.0 / pp), asg ** (1.0 / p))
    return ApReport(float(p), ap, aw, asg, rnd, curly, family.hash, w.descriptor())


def epsilon_of(rep, c_n=1.0):
    """``c_n / (2 (w)_{A_p})`` clamped into the open unit interval."""
    if c_n <= 0:
        raise WeightError("c_n must be positive")
    if rep.round < 1.0:
        raise WeightError("(w)_{A_p} below 1 violates the report invariant")
    eps = c_n / (2.0 * rep.round)
    return float(min(max(eps, np.finfo(float).tiny), np.nextafter(1.0, 0.0)))


# ---------------------------------------------------------------------------
# closed forms for |x|^alpha on intervals of R

def power_interval_average(alpha, a, b):
    """Exact mean of ``|x|^alpha`` over ``[a, b]``."""
    if not b > a:
        raise WeightError("empty interval")

    def F(t):
        return np.sign(t) * np.abs(t) ** (alpha + 1.0) / (alpha + 1.0)

    return (F(b) - F(a)) / (b - a)


def power_interval_ap(alpha, p, a, b):
    beta = alpha * (1.0 - _conj(p))
    return power_interval_average(alpha, a, b) * power_interval_average(beta, a, b) ** (p - 1.0)


def centered_interval_ap(alpha, p=2.0):
    """Value on any centred interval: ``1/((1+alpha)(1+beta)^(p-1))``, ``beta = -alpha/(p-1)``."""
    beta = -alpha / (p - 1.0)
    return 1.0 / ((1.0 + alpha) * (1.0 + beta) ** (p - 1.0))


def power_ap_sup_1d(alpha, p=2.0):
    """Supremum over all intervals, reduced by dilation to ``[t, 1]`` with ``t`` in ``[-1, 1)``."""
    def neg(t):
        return -power_interval_ap(alpha, p, t, 1.0)

    grid = np.linspace(-1.0, 0.999, 2001)
    vals = np.array([-neg(t) for t in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best = vals[i]
    if hi > lo:
        res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        best = max(best, -res.fun)
    return float(best)
