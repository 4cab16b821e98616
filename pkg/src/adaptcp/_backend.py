"""Kernel backend selection: numba JIT by default, pure Python on request.

Setting the environment variable ``ADAPTCP_DISABLE_NUMBA=1`` (or numba being
unavailable) switches every hot kernel to its pure-Python/numpy path.  Both
paths execute the same source, so all emitted numbers are bit-identical; the
flag only trades speed.  Experiment state never flows through the
environment, only the implementation backend does.
"""

import functools
import os

import numpy as np

_ENV_FLAG = "ADAPTCP_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() not in ("1", "true", "yes")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


JIT_ENABLED = _numba_requested() and _numba_available()

if JIT_ENABLED:
    import numba

    def jit_inline(func):
        """Compile a helper callable from inside other kernels."""
        return numba.njit(cache=True, nogil=True)(func)

    def jit_kernel(func):
        """Compile an entry-point kernel."""
        return numba.njit(cache=True, nogil=True)(func)

else:

    def jit_inline(func):
        return func

    def jit_kernel(func):
        # uint64 RNG arithmetic wraps mod 2**64 by design; silence the
        # numpy scalar overflow warnings on the interpreted path.
        @functools.wraps(func)
        def wrapper(*args):
            with np.errstate(over="ignore"):
                return func(*args)

        wrapper.py_func = func
        return wrapper
