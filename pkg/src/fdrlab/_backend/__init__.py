"""Batch kernel backend selection.

The simulation pipeline funnels its hot loops through three kernels
(step-up scan, step-down scan, null-hit counting).  Two interchangeable
implementations exist: a numba-compiled one and a pure-numpy one.  The
environment variable ``FDRLAB_BACKEND`` picks between them:

    unset / ""  -> numba when importable, numpy otherwise
    "numba"     -> numba, ImportError if unavailable
    "numpy"     -> numpy, always

The choice is made once at import time.  ``get_backend`` exposes both
modules by name so tests and benchmarks can compare them directly.
"""

import os

from . import _numpy

_ENV_VAR = "FDRLAB_BACKEND"


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")


def _select():
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested == "numpy":
        return _numpy
    if requested == "numba":
        return get_backend("numba")
    if requested:
        raise ValueError(
            f"{_ENV_VAR}={requested!r} not recognized; expected 'numba' or 'numpy'"
        )
    try:
        return get_backend("numba")
    except ImportError:
        return _numpy


_impl = _select()

BACKEND_NAME = _impl.BACKEND_NAME
step_up_counts = _impl.step_up_counts
step_down_counts = _impl.step_down_counts
true_null_rejections = _impl.true_null_rejections

__all__ = [
    "BACKEND_NAME",
    "get_backend",
    "step_up_counts",
    "step_down_counts",
    "true_null_rejections",
]
