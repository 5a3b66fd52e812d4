"""Optional numba acceleration for the hot numeric kernels.

The env var TMSCLEAN_NUMBA selects the path: unset or "1" uses numba when
importable, "0"/"false"/"no" forces the pure-numpy fallback.  Both paths
produce the same results; benchmarks/bench_sound.py compares their speed.
"""

import os

_flag = os.environ.get("TMSCLEAN_NUMBA", "1").strip().lower()
_WANT_NUMBA = _flag not in ("0", "false", "no", "off")

HAS_NUMBA = False
if _WANT_NUMBA:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

if HAS_NUMBA:
    from numba import njit, prange
else:
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(fn):
            return fn

        return deco
