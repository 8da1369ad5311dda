"""JIT toggle for the hot numeric kernels.

Kernels are written once, in plain numpy/math code, and compiled with
numba when it is importable.  Setting the environment variable
``COGSENSE_DISABLE_NUMBA=1`` (before import) forces the pure-numpy path;
the same functions then run uncompiled.  ``benchmarks/bench_numba.py``
times both paths.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}


def numba_requested() -> bool:
    return os.environ.get("COGSENSE_DISABLE_NUMBA", "").strip().lower() in _FALSEY


NUMBA_ENABLED = False
if numba_requested():
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


if NUMBA_ENABLED:
    from numba import njit as _njit

    def jit_kernel(func):
        return _njit(cache=True)(func)

else:

    def jit_kernel(func):
        return func
