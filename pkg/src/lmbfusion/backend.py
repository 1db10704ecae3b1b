"""Kernel backend selection.

The numeric inner loops (resampling, constant-turn propagation, likelihood
evaluation, association sampling) exist twice: a numba-jitted version and a
vectorized pure-numpy version.  The active backend is chosen once at import
time from the environment:

    LMBFUSION_BACKEND=auto    numba if importable, else numpy (default)
    LMBFUSION_BACKEND=numba   require numba, fail loudly if missing
    LMBFUSION_BACKEND=numpy   force the pure-numpy path

``benchmarks/bench_kernels.py`` times both implementations side by side.
"""

import os

_VALID = ("auto", "numba", "numpy")

_requested = os.environ.get("LMBFUSION_BACKEND", "auto").lower()
if _requested not in _VALID:
    raise RuntimeError(
        f"LMBFUSION_BACKEND must be one of {_VALID}, got {_requested!r}"
    )

if _requested == "numpy":
    ACTIVE = "numpy"
else:
    try:
        import numba  # noqa: F401

        ACTIVE = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        ACTIVE = "numpy"


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return ACTIVE
