"""Modified Bessel function of the third kind K_nu for half-integer orders.

Orders are restricted to integers and half-integers, which is exactly the
set the symmetric Laplace densities require (nu = (2 - p)/2 and
(2 - pq)/2).  Orders are carried internally as ``two_nu = 2 * nu`` so that
half-integers are exact; the public functions accept ``nu`` as a float and
validate it.

Three evaluation modes cover the full argument range:

* :func:`bessel_k`: the unscaled value, which underflows for x beyond
  roughly 700 (signalled via :class:`~laplace_mle.errors.Underflow`);
* :func:`bessel_k_log`: log K_nu(x), stable over the whole range;
* :func:`bessel_k_ratio`: K_{nu-1}(x)/K_nu(x) with the exponential
  factors cancelled analytically, as needed by the EM weights.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import NonPositiveArgumentError, Underflow

_SMALLEST_NORMAL = float(np.finfo(np.float64).tiny)
_LOG_SMALLEST_NORMAL = math.log(_SMALLEST_NORMAL)
_LOG_MAX_DOUBLE = math.log(np.finfo(np.float64).max)


def two_nu_of(nu: float) -> int:
    """Convert an order to its exact two-nu integer representation."""
    doubled = 2.0 * float(nu)
    rounded = round(doubled)
    if abs(doubled - rounded) > 1e-12:
        raise ValueError(f"order must be an integer or half-integer, got {nu}")
    return int(rounded)


def _check_argument(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise NonPositiveArgumentError(f"argument must be a positive real, got {x}")
    return x


def bessel_k(nu: float, x: float) -> float:
    """K_nu(x) for x > 0.

    Satisfies the order symmetry K_{-nu} = K_nu exactly by construction.

    Raises
    ------
    NonPositiveArgumentError
        If ``x <= 0`` or non-finite.
    Underflow
        If the value is below the smallest positive normal double; use
        :func:`bessel_k_log` in that regime.
    """
    x = _check_argument(x)
    two_m = abs(two_nu_of(nu))
    arr = np.array([x])
    scaled = float(kernels.kv_scaled(two_m, arr)[0])
    if math.isfinite(scaled):
        log_value = math.log(scaled) - x
        if log_value < _LOG_SMALLEST_NORMAL:
            raise Underflow(
                f"K_{nu}({x}) underflows double precision; use bessel_k_log"
            )
        return scaled * math.exp(-x)
    # Scaled value overflowed (large order, small argument): go through logs.
    log_value = float(kernels.kv_log(two_m, arr)[0])
    if log_value > _LOG_MAX_DOUBLE:
        return math.inf
    return math.exp(log_value)


def bessel_k_log(nu: float, x: float) -> float:
    """log K_nu(x), stable for x in [1e-6, 1e4] and beyond."""
    x = _check_argument(x)
    two_m = abs(two_nu_of(nu))
    return float(kernels.kv_log(two_m, np.array([x]))[0])


def bessel_k_ratio(nu: float, x: float) -> float:
    """K_{nu-1}(x) / K_nu(x) with exponential factors cancelled.

    The symmetry K_{-m} = K_m reduces every half-integer or integer order
    to a forward recurrence on nonnegative orders, so the ratio is
    computable even where the unscaled values underflow.
    """
    x = _check_argument(x)
    two_nu = two_nu_of(nu)
    arr = np.array([x])
    if two_nu == 1:
        return 1.0
    if two_nu <= 0:
        return float(kernels.kv_up_ratio(-two_nu, arr)[0])
    return float(1.0 / kernels.kv_up_ratio(two_nu - 2, arr)[0])
