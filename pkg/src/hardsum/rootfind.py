"""Vectorized safeguarded Newton--bisection for increasing scalar equations.

Each entry of the batch solves ``f(x) = 0`` for a strictly increasing ``f``.
Newton steps are accepted only when they land strictly inside the current
bracket; otherwise the bracket midpoint is taken.
"""
import numpy as np

from .errors import NumericalError

__all__ = ["solve_increasing"]


def _bracket(fun, lo, hi, max_doublings=200):
    flo, _ = fun(lo)
    fhi, _ = fun(hi)
    for _ in range(max_doublings):
        bad_lo = flo > 0
        bad_hi = fhi < 0
        if not (bad_lo.any() or bad_hi.any()):
            return lo, hi
        width = hi - lo
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        flo, _ = fun(lo)
        fhi, _ = fun(hi)
    raise NumericalError("could not bracket the root of an increasing function")


def solve_increasing(fun, size, scale, x0=None, lo=-10.0, hi=10.0, rtol=1e-13,
                     maxiter=200):
    """Solve ``fun(x) = 0`` entrywise for a batch of increasing functions.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> (f, df)`` evaluated elementwise on an array of length
        ``size``.  ``df`` must be positive.
    size : int
        Batch size.
    scale : array_like
        Per-entry residual scale; entry ``j`` converges once
        ``|f_j| <= rtol * scale_j``.
    x0 : array_like, optional
        Starting point, zero by default.  Entries with ``f(x0) == 0`` are
        returned unchanged, so exact roots at zero stay exactly zero.
    lo, hi : float
        Initial bracket, widened geometrically until it contains the root.

    Returns
    -------
    x : ndarray
    """
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (size,))
    x = np.zeros(size) if x0 is None else np.array(x0, dtype=float)
    f, df = fun(x)
    done = np.abs(f) <= rtol * scale
    if done.all():
        return x
    a, b = _bracket(fun, np.full(size, float(lo)), np.full(size, float(hi)))
    x = np.where(done | ((x > a) & (x < b)), x, 0.5 * (a + b))
    for _ in range(maxiter):
        f, df = fun(x)
        done = done | (np.abs(f) <= rtol * scale)
        if done.all():
            return x
        # shrink bracket with the sign of f
        a = np.where(~done & (f < 0), x, a)
        b = np.where(~done & (f > 0), x, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / df
        ok = np.isfinite(xn) & (xn > a) & (xn < b)
        xn = np.where(ok, xn, 0.5 * (a + b))
        stalled = (b - a) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        done = done | stalled
        x = np.where(done, x, xn)
    f, _ = fun(x)
    if np.any(np.abs(f) > 10 * rtol * scale):
        raise NumericalError("safeguarded Newton did not converge")
    return x
