"""Backend dispatch for the hot Bessel kernels.

The environment variable ``LAPLACE_MLE_BACKEND`` selects the implementation:

* ``auto`` (default): numba if it imports, else pure numpy;
* ``numba``: require the numba backend, raise if unavailable;
* ``numpy``: force the pure-numpy fallback.

:func:`use_backend` swaps the active backend at runtime (used by the
benchmark script and by backend-agreement tests).  All kernel functions
take ``two_m`` (twice the nonnegative order) and a 1-D float64 array of
positive arguments; order-sign handling and input validation live in
:mod:`laplace_mle.bessel`.
"""

from __future__ import annotations

import os

import numpy as np

from . import _bessel_numpy

_impl = _bessel_numpy


def _load(name: str):
    if name == "numpy":
        return _bessel_numpy
    if name == "numba":
        from . import _bessel_numba

        return _bessel_numba
    raise ValueError(f"unknown kernel backend {name!r} (choose 'numba' or 'numpy')")


def use_backend(name: str) -> str:
    """Activate a kernel backend by name; returns the active backend name."""
    global _impl
    _impl = _load(name)
    return _impl.BACKEND_NAME


def backend() -> str:
    """Name of the active backend ('numba' or 'numpy')."""
    return _impl.BACKEND_NAME


def _init_from_env() -> None:
    choice = os.environ.get("LAPLACE_MLE_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        try:
            use_backend("numba")
        except ImportError:
            use_backend("numpy")
    else:
        use_backend(choice)


def _as_array(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def kv_log(two_m: int, x: np.ndarray) -> np.ndarray:
    """log K_m(x) elementwise, m = two_m / 2 >= 0; never over/underflows."""
    return _impl.kv_log(int(two_m), _as_array(x))


def kv_up_ratio(two_m: int, x: np.ndarray) -> np.ndarray:
    """K_{m+1}(x) / K_m(x) elementwise."""
    return _impl.kv_up_ratio(int(two_m), _as_array(x))


def kv_scaled(two_m: int, x: np.ndarray) -> np.ndarray:
    """e^x K_m(x) elementwise; +inf where the scaled value overflows."""
    return _impl.kv_scaled(int(two_m), _as_array(x))


def kv_log_and_up_ratio(two_m: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fused (log K_m(x), K_{m+1}/K_m): one chain pass per EM iteration."""
    return _impl.kv_log_and_up_ratio(int(two_m), _as_array(x))


def em_log_k_and_ratio(two_nu: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log K_nu(x), K_{nu-1}(x)/K_nu(x)) for the EM weight, two_nu <= 1.

    The distributions only ever need nu = (2 - pq) / 2 <= 1/2.  Symmetry
    K_{-m} = K_m maps both quantities onto the nonnegative-order chain;
    for nu = 1/2 (the univariate case) the ratio is identically 1.
    """
    if two_nu > 1:
        raise ValueError(f"em_log_k_and_ratio requires two_nu <= 1, got {two_nu}")
    log_k, up_ratio = kv_log_and_up_ratio(abs(two_nu), x)
    if two_nu == 1:
        up_ratio = np.ones_like(log_k)
    return log_k, up_ratio


_init_from_env()
