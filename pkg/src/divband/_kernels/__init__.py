"""Kernel backend selection.

The compiled Cython core is preferred when the extension built; the NumPy
reference implementation is the fallback. Set DIVBAND_PURE_PYTHON=1 to force
the fallback (used by the parity tests and the benchmark).
"""

import os

from . import _ref

_FORCE_PY = os.environ.get("DIVBAND_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}

if not _FORCE_PY:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"
else:
    _impl = _ref
    BACKEND = "python"

middle_delta = _impl.middle_delta
clip_iterate = _impl.clip_iterate
g_by_id = _ref.g_by_id


def backend() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND
