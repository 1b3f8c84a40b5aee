"""Vectorized numpy implementation of the modified Bessel K kernels.

This is the fallback backend when numba is unavailable or disabled via
``LAPLACE_MLE_BACKEND=numpy``.  All functions take a nonnegative integer
``two_m`` (twice the order, so integer and half-integer orders are exact)
and a 1-D float64 array of positive arguments.

Strategy, shared with the numba backend:

* base orders 0 and 1: ascending series for ``x <= 2``, Steed's continued
  fraction for ``x > 2``, both producing the scaled values ``e^x K(x)``;
* base order 1/2: closed form ``e^x K_{1/2}(x) = sqrt(pi / (2x))``;
* higher orders by the forward recurrence ``K_{m+1} = K_{m-1} + (2m/x) K_m``,
  run on ratios ``K_{m+1}/K_m`` with a log accumulator so that neither
  overflow nor underflow can occur at any order or argument.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

_EULER_GAMMA = 0.5772156649015328606
_CF_EPS = 2.3e-16
_SERIES_CUTOFF = 2.0
_HALF_LOG_HALF_PI = 0.5 * np.log(0.5 * np.pi)


def _k01_scaled_series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled K_0, K_1 by ascending series, valid for 0 < x <= 2."""
    q = 0.25 * x * x
    lg = np.log(0.5 * x)
    i0 = np.ones_like(x)
    i1 = 0.5 * x
    s0 = np.zeros_like(x)
    s1 = np.full_like(x, 1.0 - 2.0 * _EULER_GAMMA)
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    hk = 0.0
    for k in range(1, 64):
        t0 *= q / (k * k)
        t1 *= q / (k * (k + 1))
        hk += 1.0 / k
        hk1 = hk + 1.0 / (k + 1)
        i0 += t0
        i1 += 0.5 * x * t1
        s0 += t0 * hk
        s1 += t1 * (hk + hk1 - 2.0 * _EULER_GAMMA)
        if np.max(t0) * max(hk, 1.0) < 1e-18:
            break
    k0 = -(lg + _EULER_GAMMA) * i0 + s0
    k1 = 1.0 / x + lg * i1 - 0.25 * x * s1
    ex = np.exp(x)
    return k0 * ex, k1 * ex


def _k01_scaled_cf2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled K_0, K_1 by Steed's continued fraction, valid for x >= 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 1001):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if np.max(np.abs(dels / s)) <= _CF_EPS:
            break
    h = a1 * h
    ek0 = np.sqrt(np.pi / (2.0 * x)) / s
    ek1 = ek0 * (x + 0.5 - h) / x
    return ek0, ek1


def _k01_scaled(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ek0 = np.empty_like(x)
    ek1 = np.empty_like(x)
    small = x <= _SERIES_CUTOFF
    if small.any():
        ek0[small], ek1[small] = _k01_scaled_series(x[small])
    large = ~small
    if large.any():
        ek0[large], ek1[large] = _k01_scaled_cf2(x[large])
    return ek0, ek1


def _base_log_and_ratio(
    two_m: int, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Scaled log and first up-ratio at the chain base order.

    Returns (log e^x K_base, K_{base+1}/K_base, steps, two_j) where `steps`
    chain steps remain to reach order m and `two_j` is twice the first
    recurrence order.
    """
    if two_m % 2 == 0:
        ek0, ek1 = _k01_scaled(x)
        return np.log(ek0), ek1 / ek0, two_m // 2, 2
    log_base = _HALF_LOG_HALF_PI - 0.5 * np.log(x)
    return log_base, 1.0 + 1.0 / x, (two_m - 1) // 2, 3


def kv_log_and_up_ratio(two_m: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``log K_m(x)`` and ``K_{m+1}(x) / K_m(x)`` for m = two_m / 2 >= 0."""
    log_acc, r, steps, two_j = _base_log_and_ratio(two_m, x)
    for _ in range(steps):
        log_acc = log_acc + np.log(r)
        r = two_j / x + 1.0 / r
        two_j += 2
    return log_acc - x, r


def kv_log(two_m: int, x: np.ndarray) -> np.ndarray:
    return kv_log_and_up_ratio(two_m, x)[0]


def kv_up_ratio(two_m: int, x: np.ndarray) -> np.ndarray:
    return kv_log_and_up_ratio(two_m, x)[1]


def kv_scaled(two_m: int, x: np.ndarray) -> np.ndarray:
    """``e^x K_m(x)`` by direct forward recurrence; +inf on overflow."""
    if two_m % 2 == 0:
        prev, cur = _k01_scaled(x)
        steps = two_m // 2
        two_j = 2
    else:
        prev = np.sqrt(np.pi / (2.0 * x))
        cur = prev * (1.0 + 1.0 / x)
        steps = (two_m - 1) // 2
        two_j = 3
    if steps == 0:
        return prev
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps - 1):
            prev, cur = cur, prev + (two_j / x) * cur
            two_j += 2
    return cur
