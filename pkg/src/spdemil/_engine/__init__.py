"""Stepping-kernel backend selection.

The compiled Cython core is preferred when importable; the numpy reference
in :mod:`pyref` is the drop-in fallback. Set ``SPDEMIL_FORCE_PYTHON=1`` to
force the fallback (used by the engine benchmark and parity tests).
``BACKEND`` records which implementation is active.
"""

import os

from . import pyref

_force = os.environ.get("SPDEMIL_FORCE_PYTHON", "").strip().lower() not in ("", "0", "false")

if _force:
    run_linear_trajectory = pyref.run_linear_trajectory
    BACKEND = "python"
else:
    try:
        from ._speed import run_linear_trajectory

        BACKEND = "cython"
    except ImportError:  # extension not built on this platform
        run_linear_trajectory = pyref.run_linear_trajectory
        BACKEND = "python"

__all__ = ["run_linear_trajectory", "BACKEND", "pyref"]
