"""Thread-cap handling for the SPARSEQUAD_THREADS environment variable.

BLAS backends read their thread-count variables when the library is first
loaded, so the cap must be installed before numpy is imported anywhere in
the process. The package __init__ calls :func:`apply_thread_cap` as its
very first statement; if numpy is already loaded the cap is a no-op for
the current process (documented best-effort behaviour).
"""
from __future__ import annotations

import os

_BLAS_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def apply_thread_cap() -> int | None:
    """Propagate SPARSEQUAD_THREADS to the BLAS thread variables.

    Returns the cap as an int, or None when the variable is unset or
    invalid. Variables already set by the user are left untouched.
    """
    raw = os.environ.get("SPARSEQUAD_THREADS")
    if not raw:
        return None
    try:
        cap = int(raw)
    except ValueError:
        return None
    if cap < 1:
        return None
    for var in _BLAS_VARS:
        os.environ.setdefault(var, str(cap))
    return cap
