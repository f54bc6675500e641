"""Kernel backend selection.

The hot inner loops in :mod:`narm.kernels` exist twice: a numba
``@njit`` version and a pure-numpy version.  The env variable
``NARM_BACKEND`` picks one:

* ``NARM_BACKEND=numba`` -- require numba, fail loudly if missing
* ``NARM_BACKEND=numpy`` -- force the numpy fallback
* unset -- use numba when importable, numpy otherwise

Both backends consume the same pre-drawn uniform variates, so results
are identical across backends given the same seed (kernels never hold
their own RNG state).
"""

import os

_ENV_VAR = "NARM_BACKEND"


def backend_name() -> str:
    """Resolved backend, 'numba' or 'numpy'."""
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        import numba  # noqa: F401  (fail here if unavailable)

        return "numba"
    if choice:
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


USE_NUMBA = backend_name() == "numba"
