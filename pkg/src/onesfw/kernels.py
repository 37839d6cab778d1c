"""Backend selection for the numerical kernels.

The compiled extension ``onesfw._kernels`` is used when it imports cleanly;
otherwise the NumPy versions in ``onesfw._kernels_py`` take over. Setting the
environment variable ``ONESFW_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("ONESFW_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

sfw_update = _impl.sfw_update
momentum_update = _impl.momentum_update
fw_step = _impl.fw_step
ascent_step = _impl.ascent_step
lmo_simplex = _impl.lmo_simplex
lmo_l1 = _impl.lmo_l1
lmo_box = _impl.lmo_box
lmo_budgeted_box = _impl.lmo_budgeted_box
multilinear_moments = _impl.multilinear_moments
coverage_table = _impl.coverage_table
max_pairwise_sqdist = _impl.max_pairwise_sqdist


def compiled_module():
    """Return the compiled kernel module, or None when it is unavailable."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
