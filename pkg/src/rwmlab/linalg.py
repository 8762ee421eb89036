"""Small dense kernels: matrix exponential, CTMC stationary law, and the
closed-form efficiency curves used to pick proposal scales.

Matrices here are tiny (d <= ~6), so nothing is tuned for size; the
exponential is a degree-6 diagonal Pade approximant with scaling and
squaring, compiled with numba because the MMPP likelihood calls it once
per inter-event gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import factorial

import numpy as np
from numba import njit

_PADE_ORDER = 6
_PADE_COEF = np.array(
    [
        factorial(2 * _PADE_ORDER - k)
        * factorial(_PADE_ORDER)
        / (factorial(2 * _PADE_ORDER) * factorial(k) * factorial(_PADE_ORDER - k))
        for k in range(_PADE_ORDER + 1)
    ]
)
# Pade(6,6) truncation error at this norm is below 1e-16.
_PADE_THETA = 0.5


@njit(cache=True)
def _matmul(a, b, out):
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@njit(cache=True)
def _solve_inplace(a, b):
    # Gaussian elimination with partial pivoting; overwrites a, b holds x.
    d = a.shape[0]
    m = b.shape[1]
    for c in range(d):
        p = c
        for r in range(c + 1, d):
            if abs(a[r, c]) > abs(a[p, c]):
                p = r
        if p != c:
            for k in range(d):
                a[c, k], a[p, k] = a[p, k], a[c, k]
            for k in range(m):
                b[c, k], b[p, k] = b[p, k], b[c, k]
        piv = a[c, c]
        for r in range(c + 1, d):
            f = a[r, c] / piv
            if f != 0.0:
                for k in range(c, d):
                    a[r, k] -= f * a[c, k]
                for k in range(m):
                    b[r, k] -= f * b[c, k]
    for c in range(d - 1, -1, -1):
        for k in range(m):
            acc = b[c, k]
            for j in range(c + 1, d):
                acc -= a[c, j] * b[j, k]
            b[c, k] = acc / a[c, c]


@njit(cache=True)
def expm_kernel(a):
    """e^a for a small square float64 array; no input checks."""
    d = a.shape[0]
    norm = 0.0
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += abs(a[i, j])
        if row > norm:
            norm = row
    s = 0
    if norm > _PADE_THETA:
        s = int(math.ceil(math.log2(norm / _PADE_THETA)))
    x = np.empty((d, d))
    scale = 2.0**-s
    for i in range(d):
        for j in range(d):
            x[i, j] = a[i, j] * scale

    num = np.zeros((d, d))
    den = np.zeros((d, d))
    power = np.eye(d)
    tmp = np.empty((d, d))
    for k in range(_PADE_ORDER + 1):
        c = _PADE_COEF[k]
        sign = 1.0 if k % 2 == 0 else -1.0
        for i in range(d):
            for j in range(d):
                num[i, j] += c * power[i, j]
                den[i, j] += sign * c * power[i, j]
        if k < _PADE_ORDER:
            _matmul(power, x, tmp)
            power, tmp = tmp, power
    _solve_inplace(den, num)
    for _ in range(s):
        _matmul(num, num, tmp)
        num, tmp = tmp, num
    return num


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """Return ``exp(a * t)``.

    Raises ValueError for non-square or non-finite ``a`` and for negative
    or non-finite ``t``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"mat_exp needs a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("mat_exp: matrix has non-finite entries")
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"mat_exp: t must be finite and >= 0, got {t}")
    if t == 0:
        return np.eye(a.shape[0])
    return expm_kernel(np.ascontiguousarray(a * t))


def _check_generator(q: np.ndarray, tol: float = 1e-12) -> None:
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"generator must be square, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("generator has non-finite entries")
    off = q[~np.eye(q.shape[0], dtype=bool)]
    if np.any(off < 0):
        raise ValueError("generator has negative off-diagonal rates")
    scale = max(1.0, float(np.abs(q).max()))
    if np.any(np.abs(q.sum(axis=1)) > tol * scale):
        raise ValueError("generator rows do not sum to zero")


def is_irreducible(q: np.ndarray) -> bool:
    """True when every state can reach every other through positive rates."""
    d = q.shape[0]
    adj = (q > 0) & ~np.eye(d, dtype=bool)
    reach = np.eye(d, dtype=bool) | adj
    for _ in range(d):
        reach = reach | (reach.astype(int) @ reach.astype(int) > 0)
    return bool(reach.all())


def stationary_dist(q) -> np.ndarray:
    """Stationary distribution of an irreducible CTMC generator.

    Solves ``nu @ q = 0`` with the normalisation row appended, by least
    squares.
    """
    q = np.asarray(q, dtype=float)
    _check_generator(q)
    d = q.shape[0]
    if d == 1:
        return np.ones(1)
    if not is_irreducible(q):
        raise ValueError("generator is reducible; stationary distribution not unique")
    a = np.vstack([q.T, np.ones((1, d))])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    nu, *_ = np.linalg.lstsq(a, b, rcond=None)
    nu = np.clip(nu, 0.0, None)
    return nu / nu.sum()


@dataclass(frozen=True)
class EfficiencyCurvePoint:
    mu: float
    speed: float
    acceptance: float


def diffusion_speed(mu: float, j: float = 1.0) -> EfficiencyCurvePoint:
    """Limiting diffusion speed and acceptance rate at rescaled scale ``mu``.

    acceptance = 2 Phi(-mu sqrt(j) / 2) and speed = mu^2 * acceptance, with
    the leading constant normalised to one.
    """
    if not mu > 0 or not j > 0:
        raise ValueError(f"diffusion_speed needs mu > 0 and j > 0, got mu={mu}, j={j}")
    # 2 Phi(-x) = erfc(x / sqrt 2)
    acc = math.erfc(0.5 * mu * math.sqrt(j) / math.sqrt(2.0))
    return EfficiencyCurvePoint(mu=float(mu), speed=mu * mu * acc, acceptance=acc)


def mwg_efficiency_ratio(block_mean_sq_inverse_scales) -> float:
    """Arithmetic over harmonic mean of per-block mean squared inverse scales.

    This is the limiting efficiency of a tuned Metropolis-within-Gibbs sweep
    relative to an equally tuned block update; it is >= 1.
    """
    c = np.asarray(block_mean_sq_inverse_scales, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("need a non-empty sequence")
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("all entries must be positive and finite")
    if np.all(c == c[0]):
        return 1.0
    arith = c.mean()
    harm = 1.0 / np.mean(1.0 / c)
    return float(max(arith / harm, 1.0))
