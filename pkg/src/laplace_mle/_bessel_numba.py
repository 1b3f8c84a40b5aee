"""Numba-compiled implementation of the modified Bessel K kernels.

Same algorithms as :mod:`laplace_mle._bessel_numpy` (ascending series for
``x <= 2``, Steed's continued fraction for ``x > 2``, forward recurrence on
ratios with a log accumulator), written as scalar kernels and driven by
``@njit`` array loops.  Compiled code is cached on disk, so the one-time
compilation cost is paid per environment rather than per process.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

BACKEND_NAME = "numba"

_EULER_GAMMA = 0.5772156649015328606
_CF_EPS = 2.3e-16
_SERIES_CUTOFF = 2.0

_JIT = {"cache": True, "nogil": True, "fastmath": False}


@njit(**_JIT)
def _k01_scaled_scalar(x: float) -> tuple[float, float]:
    """(e^x K_0(x), e^x K_1(x)) for x > 0."""
    if x <= _SERIES_CUTOFF:
        q = 0.25 * x * x
        lg = math.log(0.5 * x)
        i0 = 1.0
        i1 = 0.5 * x
        s0 = 0.0
        s1 = 1.0 - 2.0 * _EULER_GAMMA
        t0 = 1.0
        t1 = 1.0
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
            if t0 * max(hk, 1.0) < 1e-18:
                break
        k0 = -(lg + _EULER_GAMMA) * i0 + s0
        k1 = 1.0 / x + lg * i1 - 0.25 * x * s1
        ex = math.exp(x)
        return k0 * ex, k1 * ex
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 1001):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) <= _CF_EPS:
            break
    h = a1 * h
    ek0 = math.sqrt(math.pi / (2.0 * x)) / s
    ek1 = ek0 * (x + 0.5 - h) / x
    return ek0, ek1


@njit(**_JIT)
def _log_and_up_ratio_scalar(two_m: int, x: float) -> tuple[float, float]:
    """(log K_m(x), K_{m+1}(x)/K_m(x)) for m = two_m / 2 >= 0."""
    if two_m % 2 == 0:
        ek0, ek1 = _k01_scaled_scalar(x)
        log_acc = math.log(ek0)
        r = ek1 / ek0
        steps = two_m // 2
        two_j = 2
    else:
        log_acc = 0.5 * math.log(0.5 * math.pi / x)
        r = 1.0 + 1.0 / x
        steps = (two_m - 1) // 2
        two_j = 3
    for _ in range(steps):
        log_acc += math.log(r)
        r = two_j / x + 1.0 / r
        two_j += 2
    return log_acc - x, r


@njit(**_JIT)
def _kv_scaled_scalar(two_m: int, x: float) -> float:
    """e^x K_m(x) by forward recurrence on values; +inf on overflow."""
    if two_m % 2 == 0:
        prev, cur = _k01_scaled_scalar(x)
        steps = two_m // 2
        two_j = 2
    else:
        prev = math.sqrt(0.5 * math.pi / x)
        cur = prev * (1.0 + 1.0 / x)
        steps = (two_m - 1) // 2
        two_j = 3
    if steps == 0:
        return prev
    for _ in range(steps - 1):
        nxt = prev + (two_j / x) * cur
        prev = cur
        cur = nxt
        two_j += 2
    return cur


@njit(**_JIT)
def kv_log_and_up_ratio(two_m: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    log_k = np.empty(n)
    ratio = np.empty(n)
    for i in range(n):
        log_k[i], ratio[i] = _log_and_up_ratio_scalar(two_m, x[i])
    return log_k, ratio


@njit(**_JIT)
def kv_log(two_m: int, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i], _ = _log_and_up_ratio_scalar(two_m, x[i])
    return out


@njit(**_JIT)
def kv_up_ratio(two_m: int, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        _, out[i] = _log_and_up_ratio_scalar(two_m, x[i])
    return out


@njit(**_JIT)
def kv_scaled(two_m: int, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _kv_scaled_scalar(two_m, x[i])
    return out
