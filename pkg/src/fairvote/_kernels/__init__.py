"""Backend selection for the grid evaluation kernel.

Prefers the compiled Cython kernel, falling back to the pure-numpy twin
when the extension is unavailable. Setting FAIRVOTE_PURE_PYTHON=1 forces
the fallback (used by the parity tests and the benchmark). Both backends
are bit-identical by contract.
"""

from __future__ import annotations

import os

from . import _grid_py

_forced = os.environ.get("FAIRVOTE_PURE_PYTHON", "").strip()
if _forced not in ("", "0"):
    _impl = _grid_py
    BACKEND = "python"
else:
    try:
        from . import _grid_c as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _grid_py
        BACKEND = "python"

grid_counts = _impl.grid_counts

__all__ = ["grid_counts", "BACKEND"]
