"""Numba acceleration toggle.

Hot kernels ship in two flavors: an ``@njit`` version and a pure-numpy
fallback. The numpy path is selected when numba is unavailable or when the
environment variable ``OVERLAPFD_NO_NUMBA`` is set to a truthy value. Both
paths implement identical semantics (same tie-breaking, same summation
order where it matters for index results).
"""

import os

_DISABLED = os.environ.get("OVERLAPFD_NO_NUMBA", "").strip() not in ("", "0", "false", "False")

if not _DISABLED:
    try:
        from numba import njit  # noqa: F401

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover
        HAS_NUMBA = False
else:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLED

if not USE_NUMBA:

    def njit(*args, **kwargs):  # noqa: F811
        """No-op decorator stand-in so kernel modules always import."""

        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap
