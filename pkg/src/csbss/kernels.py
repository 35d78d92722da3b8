"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``CSBSS_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy fallback is used.
"""

import os

from . import _kernels_py

_force_py = os.environ.get("CSBSS_PURE_PYTHON", "") not in ("", "0")

_impl = _kernels_py
BACKEND = "python"
if not _force_py:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

oblique_geodesic = _impl.oblique_geodesic
oblique_transport = _impl.oblique_transport
min_norm_l1 = _impl.min_norm_l1
soft_threshold = _impl.soft_threshold
hard_threshold_columns = _impl.hard_threshold_columns
smoothed_l1 = _impl.smoothed_l1

__all__ = [
    "BACKEND",
    "oblique_geodesic",
    "oblique_transport",
    "min_norm_l1",
    "soft_threshold",
    "hard_threshold_columns",
    "smoothed_l1",
]
