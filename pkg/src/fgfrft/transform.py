"""Fractional powers of a unitary GFT matrix.

Two routes to ``F^alpha``:

* exact: ``V diag(exp(1j*alpha*theta)) V^H`` from a unitary
  eigendecomposition (one dense O(N^3) product per order);
* fast: ``Q_L^alpha = sum_{|n|<=L} sinc(alpha - n) F^n``, assembled in
  O(L N^2) from a cache of the powers ``F, F^2, ..., F^L``.  Negative
  powers are Hermitian transposes of cached ones, so ``Q_L^{-alpha}`` is
  exactly ``(Q_L^alpha)^H``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import CapacityError, NumericalError, ParameterError, ShapeError
from .graph import GftMatrix

DEFAULT_MEMORY_BUDGET = 4 * 2**30
SMALL = 1e-6
_BLOCK = 256


# ------------------------------------------------------------------ sinc


def _sinpi_cospi(x):
    k = np.rint(x)
    r = x - k
    sign = 1.0 - 2.0 * np.mod(k, 2.0)
    return sign * np.sin(np.pi * r), sign * np.cos(np.pi * r)


def sinc(x):
    """Normalized sinc, exactly even and exactly zero at nonzero integers."""
    ax = np.abs(np.asarray(x, dtype=float))
    s, _ = _sinpi_cospi(ax)
    small = ax < SMALL
    safe = np.where(small, 1.0, ax)
    out = np.where(small, 1.0 - (np.pi * ax) ** 2 / 6.0, s / (np.pi * safe))
    return out if out.ndim else float(out)


def _dsinc_taylor():
    # sinc'(x) = sum_k (-1)^k 2k pi^2k x^(2k-1) / (2k+1)!, in powers of x^2
    coef = [(-1) ** k * 2 * k * math.pi ** (2 * k) / math.factorial(2 * k + 1) for k in range(1, 17)]
    return np.array(coef[::-1])


_DSINC_TAYLOR = _dsinc_taylor()
SERIES_CUTOFF = 0.5


def dsinc(x):
    """Derivative of the normalized sinc, exactly odd.

    Below ``SERIES_CUTOFF`` the closed form cancels badly, so a Taylor
    polynomial (16 terms, below one ulp at the cutoff) is used instead.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    s, c = _sinpi_cospi(ax)
    small = ax < SERIES_CUTOFF
    safe = np.where(small, 1.0, ax)
    big = (c - s / (np.pi * safe)) / safe
    series = np.polyval(_DSINC_TAYLOR, ax * ax) * ax
    out = np.sign(x) * np.where(small, series, big)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SincCoeffs:
    """``c[n + l] = sinc(alpha - n)`` and its alpha-derivative for n = -l..l."""

    alpha: float
    l: int
    c: np.ndarray
    dc: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.l, self.l + 1)

    def coef(self, n: int) -> float:
        return float(self.c[n + self.l])

    def dcoef(self, n: int) -> float:
        return float(self.dc[n + self.l])


def sinc_coeffs(alpha: float, l: int) -> SincCoeffs:
    l = int(l)
    if l < 1:
        raise ParameterError("truncation order must be >= 1")
    alpha = float(alpha)
    x = alpha - np.arange(-l, l + 1)
    return SincCoeffs(alpha, l, sinc(x), dsinc(x))


def scalar_series(alpha: float, theta, l: int) -> np.ndarray:
    """Truncated series ``sum_{|n|<=l} c_n(alpha) exp(1j*n*theta)``."""
    sc = sinc_coeffs(alpha, l)
    theta = np.asarray(theta, dtype=float)
    return np.exp(1j * np.multiply.outer(theta, sc.orders)) @ sc.c


def truncation_bound(alpha: float, theta, l: int) -> float:
    """``max_k |exp(1j*alpha*theta_k) - scalar_series(alpha, theta_k, l)|``."""
    theta = np.asarray(theta, dtype=float)
    return float(np.max(np.abs(np.exp(1j * alpha * theta) - scalar_series(alpha, theta, l))))


# ----------------------------------------------------------- eigen route


@dataclass(frozen=True)
class UnitaryEigen:
    v: np.ndarray
    theta: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.size

    def reconstruct(self, alpha: float = 1.0) -> np.ndarray:
        return (self.v * np.exp(1j * alpha * self.theta)) @ self.v.conj().T


def _wrap(theta):
    # principal phase in (-pi, pi]
    return np.where(theta <= -np.pi, theta + 2 * np.pi, theta)


def _real_schur_eig(f: np.ndarray):
    # Real Schur form of an orthogonal matrix is block diagonal with 1x1
    # blocks (+-1) and 2x2 rotation blocks [[a, b], [-b, a]].
    t, z = scipy.linalg.schur(f, output="real")
    n = f.shape[0]
    v = np.empty((n, n), dtype=complex)
    lam = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            blk = t[i : i + 2, i : i + 2]
            b = 0.5 * (blk[0, 1] - blk[1, 0])
            a = 0.5 * (blk[0, 0] + blk[1, 1])
            s = 1.0 if b >= 0 else -1.0
            # [[a, b], [-b, a]] (1, +-1j)/sqrt2 = (a +- 1j*b) (1, +-1j)/sqrt2
            q1, q2 = z[:, i], z[:, i + 1]
            v[:, i] = (q1 + 1j * s * q2) / np.sqrt(2.0)
            v[:, i + 1] = (q1 - 1j * s * q2) / np.sqrt(2.0)
            lam[i] = a + 1j * abs(b)
            lam[i + 1] = a - 1j * abs(b)
            i += 2
        else:
            v[:, i] = z[:, i]
            lam[i] = t[i, i]
            i += 1
    return lam, v


def eigendecompose_unitary(f: GftMatrix) -> UnitaryEigen:
    """Unitary eigendecomposition ``F = V diag(exp(1j*theta)) V^H``, phases ascending.

    A prescribed spectrum is returned as is (sorted).  Real orthogonal
    matrices go through the real Schur form, complex ones through the
    complex Schur form; both are diagonal up to rounding for normal input.
    """
    if f.known_spectrum is not None:
        v, theta = f.known_spectrum
    else:
        a = f.f
        if np.isrealobj(a):
            lam, v = _real_schur_eig(np.asarray(a, dtype=float))
        else:
            t, v = scipy.linalg.schur(np.asarray(a, dtype=complex), output="complex")
            lam = np.diag(t)
        theta = _wrap(np.angle(lam))
    order = np.argsort(theta, kind="stable")
    e = UnitaryEigen(np.ascontiguousarray(v[:, order]), np.asarray(theta)[order])
    rel = np.linalg.norm(e.reconstruct() - f.f) / np.linalg.norm(f.f)
    if not rel <= 1e-6:
        raise NumericalError(f"eigendecomposition reconstruction residual {rel:.3e}")
    return e


@dataclass(frozen=True)
class FracOperator:
    q: np.ndarray
    alpha: float
    l: Optional[int] = None

    @property
    def n(self) -> int:
        return self.q.shape[0]


def exact_gfrft(e: UnitaryEigen, alpha: float) -> FracOperator:
    return FracOperator(e.reconstruct(alpha), float(alpha), None)


def exact_gfrft_grad(e: UnitaryEigen, alpha: float) -> np.ndarray:
    d = 1j * e.theta * np.exp(1j * alpha * e.theta)
    return (e.v * d) @ e.v.conj().T


class ExactOnline:
    """Offline factors for the eigendecomposition route.

    ``build(alpha)`` is the per-order online work: an O(N) diagonal scaling
    of ``V^H`` followed by one dense N x N product.
    """

    def __init__(self, e: UnitaryEigen):
        self.v = e.v
        self.vh = np.ascontiguousarray(e.v.conj().T)
        self.theta = e.theta

    def build(self, alpha: float) -> np.ndarray:
        scaled = self.vh * np.exp(1j * alpha * self.theta)[:, None]
        return self.v @ scaled


# ------------------------------------------------------------ power cache


class PowerCache:
    """Immutable stack ``powers[n-1] = F^n`` for n = 1..l.

    Powers are built by the recursion ``P_n = F P_{n-1}``; Hermitian
    transposes are never stored.  ``fingerprint`` hashes the source matrix.
    """

    def __init__(self, powers: np.ndarray, fp: str):
        powers.flags.writeable = False
        self.powers = powers
        self.fingerprint = fp

    @property
    def l(self) -> int:
        return self.powers.shape[0]

    @property
    def n(self) -> int:
        return self.powers.shape[1]

    @property
    def dtype(self):
        return self.powers.dtype

    def __getitem__(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.l:
            raise IndexError(f"power {n} not cached (1..{self.l})")
        return self.powers[n - 1]

    def truncated(self, l: int) -> "PowerCache":
        """View on the first ``l`` powers (no copy)."""
        if not 1 <= l <= self.l:
            raise ParameterError(f"cannot truncate a depth-{self.l} cache to {l}")
        return PowerCache(self.powers[:l], self.fingerprint)

    def verify(self, f: GftMatrix) -> None:
        if f.fingerprint != self.fingerprint:
            raise ParameterError("power cache was built from a different GFT matrix")

    def _flat(self) -> np.ndarray:
        p = self.powers
        if np.iscomplexobj(p):
            p = p.view(np.float64)
        return p.reshape(self.l, -1)


def cache_nbytes(n: int, l: int, dtype=np.complex128) -> int:
    return int(l) * int(n) ** 2 * np.dtype(dtype).itemsize


def build_power_cache(f: GftMatrix, l: int, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> PowerCache:
    l = int(l)
    if l < 1:
        raise ParameterError("truncation order must be >= 1")
    a = f.f
    dtype = np.float64 if np.isrealobj(a) else np.complex128
    need = cache_nbytes(f.n, l, dtype)
    if need > memory_budget:
        raise CapacityError(
            f"power cache for N={f.n}, L={l} needs {need / 2**30:.2f} GiB "
            f"(budget {memory_budget / 2**30:.2f} GiB)"
        )
    powers = np.empty((l, f.n, f.n), dtype=dtype)
    powers[0] = a
    for i in range(1, l):
        np.matmul(a, powers[i - 1], out=powers[i])
    return PowerCache(powers, f.fingerprint)


def _warn_far_order(alpha, l):
    if abs(alpha) > l + 1:
        warnings.warn(
            f"|alpha|={abs(alpha):g} exceeds L+1={l + 1}; most coefficient mass "
            "lies outside the truncation window",
            RuntimeWarning,
            stacklevel=3,
        )


def _combine(cache: PowerCache, rows: np.ndarray, fold: bool = True) -> list:
    """Evaluate ``sum_n rows[r, n] P_n + sum_n rows[r+1, n] P_n^H`` for r = 0, 2, ...

    ``rows`` has shape (2m, L); column n-1 weighs power n.  One pass over
    the cache via a single GEMM, then blocked transpose-adds.  With
    ``fold=False`` the two halves are returned unsummed as ``(pos, neg)``
    pairs, the operator being ``pos + neg^H``.
    """
    n = cache.n
    out = rows @ cache._flat()
    if np.iscomplexobj(cache.powers):
        out = out.view(np.complex128)
    out = out.reshape(rows.shape[0], n, n)
    if not fold:
        return [(out[r], out[r + 1]) for r in range(0, rows.shape[0], 2)]
    mats = []
    for r in range(0, rows.shape[0], 2):
        pos, neg = out[r], out[r + 1]
        for s in range(0, n, _BLOCK):
            pos[s : s + _BLOCK] += neg[:, s : s + _BLOCK].conj().T
        mats.append(pos)
    return mats


def _check_l(cache, l):
    if l is None:
        return cache
    return cache.truncated(int(l))


def fgfrft_matrix(cache: PowerCache, alpha: float, l: Optional[int] = None) -> FracOperator:
    """``Q_L^alpha = c_0 I + sum_{n=1}^{L} (c_n P_n + c_{-n} P_n^H)``."""
    cache = _check_l(cache, l)
    L = cache.l
    _warn_far_order(alpha, L)
    sc = sinc_coeffs(alpha, L)
    rows = np.stack([sc.c[L + 1 :], sc.c[:L][::-1]])
    (q,) = _combine(cache, rows)
    q[np.diag_indices(cache.n)] += sc.c[L]
    return FracOperator(q, float(alpha), L)


def fgfrft_grad(cache: PowerCache, alpha: float, l: Optional[int] = None) -> np.ndarray:
    """``dQ_L^alpha / dalpha = sum_{|n|<=L} sinc'(alpha - n) F^n``."""
    cache = _check_l(cache, l)
    L = cache.l
    sc = sinc_coeffs(alpha, L)
    rows = np.stack([sc.dc[L + 1 :], sc.dc[:L][::-1]])
    (d,) = _combine(cache, rows)
    d[np.diag_indices(cache.n)] += sc.dc[L]
    return d


def fgfrft_with_grad(cache: PowerCache, alpha: float, l: Optional[int] = None):
    """Operator and its order derivative from one pass over the cache."""
    cache = _check_l(cache, l)
    L = cache.l
    _warn_far_order(alpha, L)
    sc = sinc_coeffs(alpha, L)
    rows = np.stack([sc.c[L + 1 :], sc.c[:L][::-1], sc.dc[L + 1 :], sc.dc[:L][::-1]])
    q, d = _combine(cache, rows)
    idx = np.diag_indices(cache.n)
    q[idx] += sc.c[L]
    d[idx] += sc.dc[L]
    return FracOperator(q, float(alpha), L), d


def fgfrft_split_with_grad(cache: PowerCache, alpha: float):
    """``(Q, dQ)`` as unfolded pairs ``(A, B)`` with the operator ``A + B^H``.

    Skips the transpose-add of :func:`fgfrft_with_grad`; suited to callers
    that only apply the operators to a few vectors.
    """
    L = cache.l
    _warn_far_order(alpha, L)
    sc = sinc_coeffs(alpha, L)
    rows = np.stack([sc.c[L + 1 :], sc.c[:L][::-1], sc.dc[L + 1 :], sc.dc[:L][::-1]])
    (qa, qb), (da, db) = _combine(cache, rows, fold=False)
    idx = np.diag_indices(cache.n)
    qa[idx] += sc.c[L]
    da[idx] += sc.dc[L]
    return (qa, qb), (da, db)


# ------------------------------------------------------------- application


def _check_signal(op: FracOperator, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim not in (1, 2) or x.shape[0] != op.n:
        raise ShapeError(f"signal of shape {x.shape} does not match an {op.n}x{op.n} operator")
    return x


def apply_forward(op: FracOperator, x) -> np.ndarray:
    return op.q @ _check_signal(op, x)


def apply_inverse(op: FracOperator, x) -> np.ndarray:
    """``(Q^alpha)^H x``, which equals ``Q^{-alpha} x`` without a rebuild."""
    return op.q.conj().T @ _check_signal(op, x)


def frobenius_ratio(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


__all__ = [
    "SincCoeffs",
    "UnitaryEigen",
    "FracOperator",
    "PowerCache",
    "ExactOnline",
    "sinc",
    "dsinc",
    "sinc_coeffs",
    "scalar_series",
    "truncation_bound",
    "eigendecompose_unitary",
    "exact_gfrft",
    "exact_gfrft_grad",
    "build_power_cache",
    "cache_nbytes",
    "fgfrft_matrix",
    "fgfrft_grad",
    "fgfrft_with_grad",
    "fgfrft_split_with_grad",
    "apply_forward",
    "apply_inverse",
]
