"""Pure NumPy B-spline kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``KANBENCH_PURE_PYTHON=1`` is set. Both backends expose the same signature
and agree to rounding error.
"""

import numpy as np


def bspline_basis(x, knots, order):
    """Evaluate all B-spline basis functions and their x-derivatives.

    Parameters
    ----------
    x : ndarray, shape (B, n)
    knots : ndarray, shape (n_knots,)
        Extended, strictly increasing knot vector.
    order : int
        Spline order k (degree); 0 gives piecewise-constant indicators.

    Returns
    -------
    basis, dbasis : ndarray, shape (B, n, n_knots - 1 - order)
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    t = np.asarray(knots, dtype=np.float64)
    xe = x[:, :, None]
    inside = (xe >= t[:-1]) & (xe < t[1:])
    # close the last interval so x == knots[-1] is covered
    inside[:, :, -1] |= xe[:, :, 0] == t[-1]
    bases = inside.astype(np.float64)
    prev = bases
    for p in range(1, order + 1):
        prev = bases
        left = (xe - t[: -p - 1]) / (t[p:-1] - t[: -p - 1]) * bases[:, :, :-1]
        right = (t[p + 1:] - xe) / (t[p + 1:] - t[1:-p]) * bases[:, :, 1:]
        bases = left + right
    if order == 0:
        return bases, np.zeros_like(bases)
    # d/dx N_{j,k} = k * (N_{j,k-1} / (t_{j+k} - t_j) - N_{j+1,k-1} / (t_{j+k+1} - t_{j+1}))
    k = order
    dbases = k * (
        prev[:, :, :-1] / (t[k:-1] - t[: -k - 1])
        - prev[:, :, 1:] / (t[k + 1:] - t[1:-k])
    )
    return bases, dbases
