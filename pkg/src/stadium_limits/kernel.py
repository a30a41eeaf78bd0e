"""Kernel backend selection.

The compiled extension is preferred; the pure-Python twin is the fallback.
Set STADIUM_LIMITS_PURE=1 to force the pure backend (used by the parity
tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("STADIUM_LIMITS_PURE", "") not in ("", "0"):
    from . import _kernel_py as K
else:
    try:
        from . import _kernel_cy as K  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernel_py as K


def backend() -> str:
    """Name of the active kernel backend ('compiled' or 'pure')."""
    return K.BACKEND
