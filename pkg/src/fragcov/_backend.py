"""Backend selection for the hot kernels.

The compiled extension is preferred when it was built; otherwise the numpy
fallback is used. Set FRAGCOV_BACKEND=python (or =compiled) to force one.
"""

import os

import numpy as np

from . import _fastpath_py

_requested = os.environ.get("FRAGCOV_BACKEND", "").strip().lower()

if _requested in ("python", "py"):
    _impl = _fastpath_py
    BACKEND = "python"
else:
    try:
        from . import _fastpath as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested in ("compiled", "c"):
            raise ImportError("FRAGCOV_BACKEND=compiled but the extension is not built")
        _impl = _fastpath_py
        BACKEND = "python"


def masked_objective_grad(gamma, target, mask):
    """Dispatch to the selected backend; mask is a uint8 (0/1) array."""
    return _impl.masked_objective_grad(gamma, target, mask)


def prepare_mask(include: np.ndarray) -> np.ndarray:
    """Mask layout shared by both backends."""
    return np.ascontiguousarray(include, dtype=np.uint8)
