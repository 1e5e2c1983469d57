"""Backend selection for the B-spline hot loop.

The compiled extension is preferred; ``KANBENCH_PURE_PYTHON=1`` forces the
NumPy fallback (used by the backend-parity tests and the benchmark script).
"""

import os

from . import _kernels_py

BACKEND = "python"
bspline_basis = _kernels_py.bspline_basis

if not os.environ.get("KANBENCH_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        bspline_basis = _ckernels.bspline_basis


def available_backends():
    """Map backend name -> kernel function for every importable backend."""
    backends = {"python": _kernels_py.bspline_basis}
    try:
        from . import _ckernels
    except ImportError:
        return backends
    backends["cython"] = _ckernels.bspline_basis
    return backends
