"""JIT switch.

Hot kernels are decorated with :func:`njit`. When numba is importable and
the environment variable ``STRATBOOT_NO_NUMBA`` is unset (or ``0``), they
are compiled in nopython mode with on-disk caching. Otherwise the decorator
is a no-op and the very same kernel source runs in the interpreter on numpy
arrays and scalars, which is slow but keeps results comparable.
"""
import os

_flag = os.environ.get("STRATBOOT_NO_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - exercised via subprocess tests
    _numba = None

USE_NUMBA = _numba is not None
BACKEND = "numba" if USE_NUMBA else "python"


def njit(*args, **kwargs):
    """``numba.njit`` with cache/nogil defaults, or a pass-through."""
    if USE_NUMBA:
        opts = {"cache": True, "nogil": True}
        opts.update(kwargs)
        if len(args) == 1 and callable(args[0]):
            return _numba.njit(**opts)(args[0])
        return _numba.njit(*args, **opts)

    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda func: func
