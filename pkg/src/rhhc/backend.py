"""Kernel backend selection: compiled extension if available, else pure Python.

Set RHHC_PURE_PYTHON=1 to force the fallback (used by the benchmark and by
tests that compare the two implementations).
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("RHHC_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - build-less environments
        kernels = _pykernels

BACKEND = kernels.BACKEND
