"""Backend selection for the hot kernels.

``EMSNN_BACKEND=numpy`` forces the pure-numpy path even when numba is
installed; anything else (or unset) uses numba if it imports.
"""

import os

BACKEND_ENV = "EMSNN_BACKEND"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False


def requested_backend() -> str:
    value = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if value not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {value!r}")
    return value


def use_numba() -> bool:
    return HAVE_NUMBA and requested_backend() == "numba"
