"""Optional numba acceleration.

Hot Monte Carlo kernels are written once as plain Python loops over numpy
arrays and decorated with :func:`njit`. When numba is importable and the
environment variable ``MAPFLUCT_DISABLE_JIT`` is unset (or ``0``), they are
compiled; otherwise the very same source runs in the interpreter. Random
draws go through ``numpy.random.Generator`` in both modes, and numba
reproduces numpy's streams exactly, so the two backends agree bit for bit.
"""

import os

_DISABLED = os.environ.get("MAPFLUCT_DISABLE_JIT", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

JIT_ENABLED = _numba is not None


def njit(func=None, **kwargs):
    """Compile with ``numba.njit(cache=True)`` when available, else return ``func``."""
    def wrap(f):
        if _numba is None:
            return f
        opts = {"cache": True}
        opts.update(kwargs)
        return _numba.njit(**opts)(f)

    if func is None:
        return wrap
    return wrap(func)


def python_version_of(func):
    """Return the interpreted twin of a kernel (itself when JIT is off)."""
    return getattr(func, "py_func", func)
