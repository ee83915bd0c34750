"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the NumPy fallback.
Setting ``MAXSTAB_BACKEND=python`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
ts_advance = _kernels_py.ts_advance
ef_advance = _kernels_py.ef_advance

if os.environ.get("MAXSTAB_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        ts_advance = _compiled.ts_advance
        ef_advance = _compiled.ef_advance


def get_backend(name):
    """Return the ``(ts_advance, ef_advance)`` pair of a named backend."""
    if name == "python":
        return _kernels_py.ts_advance, _kernels_py.ef_advance
    if name == "cython":
        from . import _kernels
        return _kernels.ts_advance, _kernels.ef_advance
    raise ValueError(f"unknown backend {name!r}")
