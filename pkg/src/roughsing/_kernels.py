"""Hot loops with a numba path and a pure-numpy fallback.

Set ``ROUGHSING_NUMBA=0`` in the environment before import to force the
numpy implementations. Every public function here dispatches on
:data:`USE_NUMBA`; both paths compute the same quantities and are compared
in the test suite and in ``benchmarks/bench_kernels.py``.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ROUGHSING_NUMBA", "1") != "0"


def _njit(fn):
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend():
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Fujii-Wilson sums: for each cube Q, sum over cells x in Q of
#   max_r  S(B_r(x) ∩ Q) / (2r+1)^n,   r = 0 .. side(Q)//2
# where S is a cell sum read from an inclusive prefix table P.

def _fw_loop_1d(P, starts, sides):
    nc = sides.shape[0]
    out = np.zeros(nc)
    for c in range(nc):
        a = starts[c, 0]
        s = sides[c]
        tot = 0.0
        for x in range(a, a + s):
            best = 0.0
            for r in range(s // 2 + 1):
                lo = max(x - r, a)
                hi = min(x + r, a + s - 1)
                v = (P[hi + 1] - P[lo]) / (2 * r + 1)
                if v > best:
                    best = v
            tot += best
        out[c] = tot
    return out


def _fw_loop_2d(P, starts, sides):
    nc = sides.shape[0]
    out = np.zeros(nc)
    for c in range(nc):
        a0 = starts[c, 0]
        a1 = starts[c, 1]
        s = sides[c]
        tot = 0.0
        for x0 in range(a0, a0 + s):
            for x1 in range(a1, a1 + s):
                best = 0.0
                for r in range(s // 2 + 1):
                    lo0 = max(x0 - r, a0)
                    hi0 = min(x0 + r, a0 + s - 1) + 1
                    lo1 = max(x1 - r, a1)
                    hi1 = min(x1 + r, a1 + s - 1) + 1
                    v = P[hi0, hi1] - P[lo0, hi1] - P[hi0, lo1] + P[lo0, lo1]
                    v /= (2 * r + 1) * (2 * r + 1)
                    if v > best:
                        best = v
                tot += best
        out[c] = tot
    return out


_fw_jit_1d = _njit(_fw_loop_1d)
_fw_jit_2d = _njit(_fw_loop_2d)


def _fw_numpy(P, starts, sides):
    n = starts.shape[1]
    out = np.zeros(sides.shape[0])
    for s in np.unique(sides):
        sel = np.nonzero(sides == s)[0]
        A = starts[sel]
        d = np.arange(s)
        if n == 1:
            a = A[:, 0][:, None]
            x = a + d[None, :]
            best = np.zeros(x.shape)
            for r in range(s // 2 + 1):
                lo = np.maximum(x - r, a)
                hi = np.minimum(x + r, a + s - 1) + 1
                best = np.maximum(best, (P[hi] - P[lo]) / (2 * r + 1))
            out[sel] = best.sum(axis=1)
        else:
            a0 = A[:, 0][:, None, None]
            a1 = A[:, 1][:, None, None]
            x0 = a0 + d[None, :, None]
            x1 = a1 + d[None, None, :]
            best = np.zeros((len(sel), s, s))
            for r in range(s // 2 + 1):
                lo0 = np.maximum(x0 - r, a0)
                hi0 = np.minimum(x0 + r, a0 + s - 1) + 1
                lo1 = np.maximum(x1 - r, a1)
                hi1 = np.minimum(x1 + r, a1 + s - 1) + 1
                v = P[hi0, hi1] - P[lo0, hi1] - P[hi0, lo1] + P[lo0, lo1]
                best = np.maximum(best, v / (2 * r + 1) ** 2)
            out[sel] = best.sum(axis=(1, 2))
    return out


def fujii_wilson_sums(P, starts, sides, use_numba=None):
    """Summed centered maximal averages of ``w chi_Q`` over each cube.

    Parameters
    ----------
    P : ndarray
        Inclusive prefix-sum table of shape ``(M+1,)*n`` with a zero first
        row/column, so that ``P[b]-P[a]`` is the sum over cells ``a..b-1``.
    starts : ndarray of int64, shape (ncubes, n)
        Lower corner of each cube in cell indices.
    sides : ndarray of int64, shape (ncubes,)
        Side length of each cube in cells.

    Returns
    -------
    ndarray, shape (ncubes,)
        ``sum_{x in Q} max_r avg_{B_r(x) ∩ Q} w`` with the average taken
        over the full ``(2r+1)^n`` cells of ``B_r(x)``.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    sides = np.ascontiguousarray(sides, dtype=np.int64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    if not use_numba:
        return _fw_numpy(P, starts, sides)
    if starts.shape[1] == 1:
        return _fw_jit_1d(P, starts, sides)
    return _fw_jit_2d(P, starts, sides)


# ---------------------------------------------------------------------------
# Polar quadrature of the band Fourier transform:
#   khat(xi) = sum_r sum_t wr[r] * at[t] * exp(-i r (xi . u_t))

def _khat_loop(xi, r, wr, ux, uy, at):
    N = xi.shape[0]
    out = np.zeros(N, dtype=np.complex128)
    for q in range(N):
        acc = 0.0 + 0.0j
        for t in range(ux.shape[0]):
            p = xi[q, 0] * ux[t] + xi[q, 1] * uy[t]
            inner = 0.0 + 0.0j
            for m in range(r.shape[0]):
                ph = r[m] * p
                inner += wr[m] * (np.cos(ph) - 1j * np.sin(ph))
            acc += at[t] * inner
        out[q] = acc
    return out


_khat_jit = _njit(_khat_loop)


def _khat_numpy(xi, r, wr, ux, uy, at, chunk_elems=2_000_000):
    N = xi.shape[0]
    out = np.zeros(N, dtype=np.complex128)
    per = max(1, chunk_elems // max(1, r.size * ux.size))
    for s in range(0, N, per):
        p = xi[s:s + per, 0:1] * ux[None, :] + xi[s:s + per, 1:2] * uy[None, :]
        E = np.exp(-1j * p[:, :, None] * r[None, None, :]) @ wr
        out[s:s + per] = E @ at
    return out


def polar_fourier_sum(xi, r, wr, ux, uy, at, use_numba=None):
    """Tensor quadrature ``sum_r sum_t wr at exp(-i r xi.u_t)``.

    Parameters
    ----------
    xi : ndarray, shape (N, 2)
        Angular frequencies. For one-dimensional bands pass ``xi[:,1]=0``
        and directions ``uy=0``.
    r, wr : ndarray
        Radial nodes and weights (weights include any power of ``r``).
    ux, uy, at : ndarray
        Direction cosines of the angular nodes and the angular weights
        already multiplied by the symbol values.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (xi, r, wr, ux, uy, at)]
    if use_numba:
        return _khat_jit(*args)
    return _khat_numpy(*args)


# ---------------------------------------------------------------------------
# Brute-force periodic sums, the spatial oracle for convolution and
# commutator identities. K, b, f are flat arrays in row-major lattice order.

def _direct_loop(K, f, b, M, n, hn):
    size = f.shape[0]
    out = np.zeros(size, dtype=np.complex128)
    for x in range(size):
        if n == 1:
            x0 = x
            x1 = 0
        else:
            x0 = x // M
            x1 = x % M
        acc = 0.0 + 0.0j
        for y in range(size):
            if n == 1:
                d = (x0 - y) % M
            else:
                d = ((x0 - y // M) % M) * M + (x1 - y % M) % M
            acc += K[d] * (b[x] - b[y]) * f[y]
        out[x] = acc * hn
    return out


_direct_jit = _njit(_direct_loop)


def _direct_numpy(K, f, b, M, n, hn, rows=256):
    size = f.shape[0]
    idx = np.arange(size)
    if n == 1:
        c0, c1 = idx, np.zeros_like(idx)
    else:
        c0, c1 = idx // M, idx % M
    out = np.zeros(size, dtype=np.complex128)
    for s in range(0, size, rows):
        x = idx[s:s + rows]
        d = ((c0[x][:, None] - c0[None, :]) % M) * (M if n == 2 else 1)
        if n == 2:
            d = d + (c1[x][:, None] - c1[None, :]) % M
        inc = b[x][:, None] - b[None, :]
        out[s:s + rows] = (K[d] * inc * f[None, :]).sum(axis=1) * hn
    return out


def direct_sum(K, f, b, M, n, hn, use_numba=None):
    """Spatial quadrature ``h^n sum_y K(x-y) (b(x)-b(y)) f(y)`` on the torus."""
    if use_numba is None:
        use_numba = USE_NUMBA
    K = np.ascontiguousarray(K, dtype=np.complex128).ravel()
    f = np.ascontiguousarray(f, dtype=np.complex128).ravel()
    b = np.ascontiguousarray(b, dtype=np.complex128).ravel()
    if use_numba:
        return _direct_jit(K, f, b, M, n, hn)
    return _direct_numpy(K, f, b, M, n, hn)


def direct_convolution(K, f, M, n, hn, use_numba=None):
    """Spatial quadrature ``h^n sum_y K(x-y) f(y)`` on the torus."""
    if use_numba is None:
        use_numba = USE_NUMBA
    K = np.ascontiguousarray(K, dtype=np.complex128).ravel()
    f = np.ascontiguousarray(f, dtype=np.complex128).ravel()
    if use_numba:
        return _conv_jit(K, f, M, n, hn)
    return _conv_numpy(K, f, M, n, hn)


def _conv_loop(K, f, M, n, hn):
    size = f.shape[0]
    out = np.zeros(size, dtype=np.complex128)
    for x in range(size):
        if n == 1:
            x0 = x
            x1 = 0
        else:
            x0 = x // M
            x1 = x % M
        acc = 0.0 + 0.0j
        for y in range(size):
            if n == 1:
                d = (x0 - y) % M
            else:
                d = ((x0 - y // M) % M) * M + (x1 - y % M) % M
            acc += K[d] * f[y]
        out[x] = acc * hn
    return out


_conv_jit = _njit(_conv_loop)


def _conv_numpy(K, f, M, n, hn):
    size = f.shape[0]
    idx = np.arange(size)
    if n == 1:
        c0, c1 = idx, np.zeros_like(idx)
    else:
        c0, c1 = idx // M, idx % M
    out = np.zeros(size, dtype=np.complex128)
    rows = 256
    for s in range(0, size, rows):
        x = idx[s:s + rows]
        d = ((c0[x][:, None] - c0[None, :]) % M) * (M if n == 2 else 1)
        if n == 2:
            d = d + (c1[x][:, None] - c1[None, :]) % M
        out[s:s + rows] = (K[d] * f[None, :]).sum(axis=1) * hn
    return out
