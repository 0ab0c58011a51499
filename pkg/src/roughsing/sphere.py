"""The rough symbol Omega on the unit sphere of R^1 or R^2.

On the circle the symbol is stored as nodal values at ``theta_i = 2 pi i/S``
with trapezoidal weights ``2 pi / S``; this rule is exact for trigonometric
polynomials of degree below ``S``. Off-node evaluation uses trigonometric
interpolation, so a band-limited symbol is reproduced exactly.
"""
from dataclasses import dataclass
import math

import numpy as np

__all__ = [
    "SphereSymbol", "MomentReport", "CancellationError", "lq_norm", "moments",
    "check_cancellation", "project_cancellation", "from_harmonic", "from_pair",
    "from_function",
]


class CancellationError(ValueError):
    """Raised when the cancellation projection cannot produce a nonzero symbol."""


@dataclass(frozen=True, eq=False)
class SphereSymbol:
    """Nodal values of Omega.

    Parameters
    ----------
    n : int
        Ambient dimension, 1 or 2.
    values : ndarray
        For ``n=1`` the pair ``(Omega(+1), Omega(-1))``; for ``n=2`` the
        values at ``S`` equispaced angles starting at 0.
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.n == 1:
            if v.shape != (2,):
                raise ValueError("n=1 symbols hold exactly two values")
        elif self.n == 2:
            S = v.size
            if v.ndim != 1 or S < 8 or S % 2:
                raise ValueError("n=2 symbols need an even number S >= 8 of nodes")
        else:
            raise ValueError(f"unsupported dimension n={self.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("symbol values must be finite")

    @property
    def S(self):
        return self.values.size

    def nodes(self):
        """Angles (n=2) or points (+1, -1) (n=1)."""
        if self.n == 1:
            return np.array([1.0, -1.0])
        return 2 * np.pi * np.arange(self.S) / self.S

    def weights(self):
        if self.n == 1:
            return np.ones(2)
        return np.full(self.S, 2 * np.pi / self.S)

    def total_measure(self):
        return 2.0 if self.n == 1 else 2 * np.pi

    def __add__(self, other):
        return SphereSymbol(self.n, self.values + other.values)

    def __mul__(self, c):
        return SphereSymbol(self.n, self.values * c)

    __rmul__ = __mul__

    def coefficients(self):
        """Complex Fourier coefficients ``c_m`` with ``Omega = sum c_m e^{i m theta}``."""
        return np.fft.fft(self.values) / self.S

    def evaluate(self, x, y=None, method="trig"):
        """Omega at the direction of ``x`` (n=1) or of ``(x, y)`` (n=2).

        ``method="trig"`` interpolates trigonometrically, ``"nearest"`` takes
        the closest node (useful for piecewise symbols).
        """
        if self.n == 1:
            x = np.asarray(x, dtype=float)
            return np.where(x >= 0, self.values[0], self.values[1])
        theta = np.arctan2(y, x)
        return self.at_angle(theta, method)

    def at_angle(self, theta, method="trig"):
        theta = np.asarray(theta, dtype=float)
        S = self.S
        if method == "nearest":
            i = np.rint(np.mod(theta, 2 * np.pi) * S / (2 * np.pi)).astype(int) % S
            return self.values[i]
        c = self.coefficients()
        m = np.fft.fftfreq(S, d=1.0 / S)
        keep = np.nonzero(np.abs(c) > 1e-15 * np.abs(c).max(initial=0.0))[0]
        out = np.zeros(theta.shape)
        for i in keep:
            if i == S // 2:
                # Nyquist term enters as a cosine so the interpolant is real
                out += c[i].real * np.cos(S // 2 * theta)
            else:
                out += (c[i] * np.exp(1j * m[i] * theta)).real
        return out


def from_harmonic(n, m, amplitude=1.0, S=64, kind="cos"):
    """``amplitude * cos(m theta)`` (or ``sin``) on ``S`` circle nodes."""
    if n != 2:
        raise ValueError("harmonic symbols are defined for n=2")
    if S <= 2 * abs(m):
        S = max(8, 2 * abs(m) + 2)
    th = 2 * np.pi * np.arange(S) / S
    f = np.cos if kind == "cos" else np.sin
    return SphereSymbol(2, amplitude * f(m * th))


def from_pair(plus, minus):
    """The n=1 symbol with ``Omega(+1)=plus``, ``Omega(-1)=minus``."""
    return SphereSymbol(1, [plus, minus])


def from_function(fn, S=64):
    """Sample ``fn(theta)`` at ``S`` circle nodes."""
    th = 2 * np.pi * np.arange(S) / S
    return SphereSymbol(2, fn(th))


def lq_norm(omega, q):
    """``(sum |Omega|^q w_i)^(1/q)``; ``q=inf`` is the nodal maximum."""
    if q < 1:
        raise ValueError("q must be >= 1")
    a = np.abs(omega.values)
    if q == np.inf:
        return float(a.max())
    return float(np.sum(a ** q * omega.weights()) ** (1.0 / q))


@dataclass(frozen=True)
class MomentReport:
    """Zeroth moment and the first moments against each coordinate."""

    zeroth: float
    first: tuple

    def max_abs(self):
        return max([abs(self.zeroth)] + [abs(v) for v in self.first])

    def as_dict(self):
        d = {"(*,0)": self.zeroth}
        for k, v in enumerate(self.first, start=1):
            d[f"({k},1)"] = v
        return d


def moments(omega):
    """Quadrature moments ``int Omega (x'_k)^N dsigma`` for N in {0, 1}."""
    v, w = omega.values, omega.weights()
    if omega.n == 1:
        x = omega.nodes()
        return MomentReport(float(np.sum(v * w)), (float(np.sum(v * x * w)),))
    th = omega.nodes()
    return MomentReport(
        float(np.sum(v * w)),
        (float(np.sum(v * np.cos(th) * w)), float(np.sum(v * np.sin(th) * w))),
    )


def check_cancellation(omega, tol=1e-10):
    return moments(omega).max_abs() <= tol


def project_cancellation(omega):
    """Remove the degree 0 and degree 1 circular harmonics."""
    if omega.n == 1:
        raise CancellationError(
            "in one dimension the cancellation conditions force Omega = 0")
    c = np.fft.fft(omega.values)
    c[0] = 0.0
    c[1] = 0.0
    c[-1] = 0.0
    return SphereSymbol(2, np.fft.ifft(c).real)


def l1_norm(omega):
    return lq_norm(omega, 1)


def sup_norm(omega):
    return lq_norm(omega, math.inf)
