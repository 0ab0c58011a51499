"""Periodic lattice model of R^n, transforms and weighted norms.

Lattice order is FFT order along every axis: index ``i`` on an axis sits at
``x = h * (((i + M/2) mod M) - M/2)``, so index 0 is the origin and the
negative half-axis occupies the upper indices. Values are stored row-major.
The frequency index ``kappa`` in ``[-M/2, M/2)`` maps to the angular
frequency ``xi = pi * kappa / L``, and transforms use ``exp(-i xi . x)``.
"""
from dataclasses import dataclass
import struct

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec", "GridFunction", "FrequencyIndex", "make_grid", "sample",
    "dft", "idft", "lp_norm", "weighted_inner_product",
]

_HEADER = struct.Struct("<qqd")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice on ``[-L, L)^n`` with ``M`` points per axis."""

    n: int
    M: int
    L: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GridError(f"unsupported dimension n={self.n}")
        if self.M < 16 or self.M & (self.M - 1):
            raise GridError(f"M must be a power of two >= 16, got {self.M}")
        if not self.L > 0:
            raise GridError(f"L must be positive, got {self.L}")

    @property
    def h(self):
        return 2.0 * self.L / self.M

    @property
    def shape(self):
        return (self.M,) * self.n

    @property
    def size(self):
        return self.M ** self.n

    def axis(self):
        """Physical coordinates of one axis in lattice order."""
        i = np.arange(self.M)
        return self.h * (((i + self.M // 2) % self.M) - self.M // 2)

    def coords(self):
        """Tuple of coordinate arrays of shape ``self.shape``."""
        a = self.axis()
        if self.n == 1:
            return (a,)
        return tuple(np.meshgrid(a, a, indexing="ij"))

    def radius(self):
        c = self.coords()
        return np.sqrt(sum(x * x for x in c))

    def freq_axis(self):
        return np.pi * sfft.fftfreq(self.M, d=1.0 / self.M) / self.L

    def freqs(self):
        """Angular frequency arrays ``xi`` of shape ``self.shape`` per axis."""
        a = self.freq_axis()
        if self.n == 1:
            return (a,)
        return tuple(np.meshgrid(a, a, indexing="ij"))

    def freq_radius(self):
        return np.sqrt(sum(x * x for x in self.freqs()))

    def descriptor(self):
        return {"n": self.n, "M": self.M, "L": float(self.L)}


def make_grid(n, M, L):
    """Validated :class:`GridSpec`; ``h = 2L/M``."""
    return GridSpec(int(n), int(M), float(L))


@dataclass(frozen=True)
class FrequencyIndex:
    """Integer multi-index ``kappa`` with physical frequency ``pi kappa / L``."""

    spec: GridSpec
    kappa: tuple

    def __post_init__(self):
        object.__setattr__(self, "kappa", tuple(int(k) for k in self.kappa))
        if len(self.kappa) != self.spec.n:
            raise GridError("index length must equal the dimension")
        for k in self.kappa:
            if not -self.spec.M // 2 <= k < self.spec.M // 2:
                raise GridError(f"frequency index {k} out of range")

    @property
    def xi(self):
        return tuple(np.pi * k / self.spec.L for k in self.kappa)

    @property
    def flat(self):
        """Row-major position in the transform array."""
        pos = 0
        for k in self.kappa:
            pos = pos * self.spec.M + (k % self.spec.M)
        return pos

    @classmethod
    def from_xi(cls, spec, xi):
        kap = tuple(int(round(x * spec.L / np.pi)) for x in xi)
        return cls(spec, kap)

    @classmethod
    def from_flat(cls, spec, pos):
        kap = []
        for _ in range(spec.n):
            k = pos % spec.M
            kap.append(k - spec.M if k >= spec.M // 2 else k)
            pos //= spec.M
        return cls(spec, tuple(reversed(kap)))


class GridFunction:
    """Complex samples on a :class:`GridSpec` lattice.

    The array is held with shape ``spec.shape``; ``values.ravel()`` gives the
    row-major lattice order. Instances are treated as immutable.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec, values):
        v = np.asarray(values, dtype=np.complex128)
        if v.size != spec.size:
            raise GridError(f"expected {spec.size} values, got {v.size}")
        v = v.reshape(spec.shape)
        if not np.all(np.isfinite(v)):
            raise GridError("grid function has non-finite entries")
        v.setflags(write=False)
        self.spec = spec
        self.values = v

    def __repr__(self):
        return f"GridFunction(n={self.spec.n}, M={self.spec.M}, L={self.spec.L})"

    def _wrap(self, v):
        return GridFunction(self.spec, v)

    def __add__(self, other):
        _same(self, other)
        return self._wrap(self.values + other.values)

    def __sub__(self, other):
        _same(self, other)
        return self._wrap(self.values - other.values)

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            _same(self, c)
            return self._wrap(self.values * c.values)
        return self._wrap(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    @property
    def real(self):
        return self.values.real

    def to_bytes(self):
        """24-byte little-endian header ``(n, M, L)`` then interleaved re/im."""
        head = _HEADER.pack(self.spec.n, self.spec.M, float(self.spec.L))
        body = np.ascontiguousarray(self.values.ravel()).view("<f8").tobytes()
        return head + body

    @classmethod
    def from_bytes(cls, data):
        n, M, L = _HEADER.unpack_from(data, 0)
        spec = make_grid(n, M, L)
        arr = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        if arr.size != 2 * spec.size:
            raise GridError("payload length does not match header")
        return cls(spec, arr.view(np.complex128))

    def to_csv(self):
        flat = self.values.ravel()
        lines = ["index,re,im"]
        lines += [f"{i},{float(z.real)!r},{float(z.imag)!r}" for i, z in enumerate(flat)]
        return "\n".join(lines) + "\n"


def _same(f, g):
    if f.spec != g.spec:
        raise GridError("grid specs differ")


def sample(spec, fn):
    """Evaluate ``fn`` at every lattice point.

    ``fn`` receives the coordinate arrays (one per axis) and must return an
    array broadcastable to ``spec.shape``.
    """
    coords = spec.coords()
    with np.errstate(all="ignore"):
        v = np.broadcast_to(np.asarray(fn(*coords), dtype=np.complex128), spec.shape)
    bad = ~np.isfinite(v)
    if bad.any():
        where = tuple(int(i[0]) for i in np.nonzero(bad))
        point = tuple(float(c[where]) for c in coords)
        raise GridError(f"function is not finite at lattice point {point}")
    return GridFunction(spec, v)


def _dft_scale(spec):
    return spec.h ** spec.n / (2.0 * spec.L) ** (spec.n / 2.0)


def dft(f):
    """Unitary-normalized transform: ``sum |f|^2 h^n = sum |F|^2``."""
    F = sfft.fftn(f.values) * _dft_scale(f.spec)
    return GridFunction(f.spec, F)


def idft(F):
    f = sfft.ifftn(F.values) / _dft_scale(F.spec)
    return GridFunction(F.spec, f)


def _weight_values(w, spec):
    if w is None:
        return None
    if isinstance(w, GridFunction):
        v = w.values.real
    elif isinstance(w, np.ndarray):
        v = w
    else:
        v = w.on_grid(spec)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise GridError("weight must be positive and finite")
    return v


def lp_norm(f, p, w=None):
    """Weighted ``(sum |f|^p w h^n)^(1/p)``; ``p=inf`` is the sup norm, no weight."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise GridError("p must be >= 1")
    wv = _weight_values(w, f.spec)
    a = np.abs(f.values)
    scale = a.max()
    if scale == 0:
        return 0.0
    t = (a / scale) ** p
    if wv is not None:
        t = t * wv
    return float(scale * (t.sum() * f.spec.h ** f.spec.n) ** (1.0 / p))


def weighted_inner_product(f, g, w=None):
    """``sum f conj(g) w h^n``."""
    _same(f, g)
    wv = _weight_values(w, f.spec)
    t = f.values * np.conj(g.values)
    if wv is not None:
        t = t * wv
    return complex(t.sum() * f.spec.h ** f.spec.n)
