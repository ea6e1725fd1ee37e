"""Backend selection for the hot kernels.

Each hot kernel has a numba version (explicit loops, compiled) and a
vectorized numpy version with the same signature and results.  The numba
path is used when numba imports and is not disabled; set ``REMLAB_NUMBA=0``
before import to force the numpy path.
"""
import os
import logging

_flag = os.environ.get("REMLAB_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


