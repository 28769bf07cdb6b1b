"""Kernel backend selection.

The compiled extension is used when importable; ``EDCPATROL_PURE=1`` forces
the pure-Python fallback.
"""

import os

if os.environ.get("EDCPATROL_PURE"):
    from edcpatrol import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from edcpatrol import _kernels as _impl
    except ImportError:
        from edcpatrol import _kernels_py as _impl

        BACKEND = "python"
    else:
        BACKEND = "cython"

visit_outcomes = _impl.visit_outcomes
held_karp = _impl.held_karp

__all__ = ["BACKEND", "held_karp", "visit_outcomes"]
