"""Optional numba acceleration.

Set ``STOCKFLOW_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
The same source is used on both paths, so results are bit-identical.
"""
import os

JIT_DISABLED = os.environ.get("STOCKFLOW_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes"}

try:
    if JIT_DISABLED:
        raise ImportError
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def njit(func=None, **options):
    """``numba.njit`` when available and enabled, identity otherwise."""
    options.setdefault("cache", True)

    def decorate(f):
        if HAVE_NUMBA:
            return _numba_njit(**options)(f)
        return f

    if func is not None:
        return decorate(func)
    return decorate


def python_impl(kernel):
    """Return the uncompiled Python function behind a kernel."""
    return getattr(kernel, "py_func", kernel)
