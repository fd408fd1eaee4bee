"""Numerical probes of the curvature constants declared by an instance.

These measure smoothness, strong convexity and average smoothness from the
oracle-level Hessian actions, independently of the formulas used to set the
constants.  Small problems are assembled densely; large ones go through
Lanczos (``scipy.sparse.linalg.eigsh``).
"""
import math

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import UnsupportedFamilyError
from .instances import bump_second
from .oracle import component_gradient, component_value, full_gradient, full_value
from .structure import apply_group_gram

__all__ = [
    "component_hessian_apply",
    "full_hessian_apply",
    "extreme_eigenvalue",
    "smoothness_probe",
    "strong_convexity_probe",
    "average_smoothness_probe",
    "bracket_check",
    "nc_gradient_floor",
    "nc_gradient_floor_check",
    "nc_descent_check",
]

_DENSE_MAX = 600


def component_hessian_apply(inst, i, v, x=None):
    """Hessian of ``f_i`` at ``x`` applied to ``v`` (``x`` matters only for NC)."""
    v = np.asarray(v, dtype=float)
    out = 2 * inst.lambda2 * v
    if inst.family != "ONE_D":
        out = out + 2 * inst.lambda1 * apply_group_gram(inst.spec, inst.partition, i, v)
    if inst.family == "NC":
        x = np.zeros(inst.dim) if x is None else np.asarray(x, dtype=float)
        b = inst.nc_beta
        w = np.zeros(inst.dim)
        w[:inst.m] = inst.nc_lambda * inst.nc_alpha / b ** 2 * bump_second(x[:inst.m] / b)
        out = out + w * v
    return out


def full_hessian_apply(inst, v, x=None):
    return sum(component_hessian_apply(inst, i, v, x) for i in range(1, inst.n + 1)) / inst.n


def extreme_eigenvalue(apply, dim, which="LA"):
    """Largest (``LA``) or smallest (``SA``) eigenvalue of a symmetric operator."""
    if dim <= _DENSE_MAX:
        H = np.column_stack([apply(e) for e in np.eye(dim)])
        w = np.linalg.eigvalsh(0.5 * (H + H.T))
        return float(w[-1] if which == "LA" else w[0])
    op = LinearOperator((dim, dim), matvec=apply, dtype=float)
    return float(eigsh(op, k=1, which=which, tol=1e-12, return_eigenvectors=False)[0])


def smoothness_probe(inst, i, x=None):
    """Largest Hessian eigenvalue of component ``i``."""
    return extreme_eigenvalue(lambda v: component_hessian_apply(inst, i, v, x), inst.dim)


def strong_convexity_probe(inst, i=None):
    """Smallest Hessian eigenvalue of component ``i`` (or of ``F`` if ``i`` is None)."""
    if not inst.convex:
        raise UnsupportedFamilyError("strong convexity is not defined for the nonconvex family")
    if i is None:
        return extreme_eigenvalue(lambda v: full_hessian_apply(inst, v), inst.dim, "SA")
    return extreme_eigenvalue(lambda v: component_hessian_apply(inst, i, v), inst.dim, "SA")


def average_smoothness_probe(inst, pairs=200, seed=0):
    """Estimate ``sup sqrt((1/n) sum_i ||grad f_i(x) - grad f_i(y)||^2) / ||x - y||``.

    Returns the larger of the operator estimate (top eigenvalue of
    ``(1/n) sum_i H_i^2``) and the worst ratio over random pairs.
    """
    if not inst.convex:
        raise UnsupportedFamilyError("average smoothness is probed for quadratic families")

    def sq(v):
        return sum(component_hessian_apply(inst, i, component_hessian_apply(inst, i, v))
                   for i in range(1, inst.n + 1)) / inst.n

    best = math.sqrt(max(extreme_eigenvalue(sq, inst.dim), 0.0))
    rng = np.random.default_rng(seed)
    for _ in range(pairs):
        x, y = rng.standard_normal((2, inst.dim))
        d = sum(float(np.sum((component_gradient(inst, i, x) - component_gradient(inst, i, y)) ** 2))
                for i in range(1, inst.n + 1)) / inst.n
        best = max(best, math.sqrt(d) / float(np.linalg.norm(x - y)))
    return best


def bracket_check(inst, lower, upper, pairs=1000, seed=0, tol=1e-9):
    """Check ``lower/2 ||y-x||^2 <= D_i(y, x) <= upper/2 ||y-x||^2`` on random pairs.

    ``D_i(y, x) = f_i(y) - f_i(x) - <grad f_i(x), y - x>`` is the Bregman gap
    of component ``i``.  Points are drawn at the scale where the nonconvex
    term bends (a few multiples of ``beta`` for NC).  Returns the number of
    violations and the extreme normalized gaps seen.
    """
    rng = np.random.default_rng(seed)
    scale = inst.nc_beta if inst.family == "NC" else 1.0
    bad, lo_seen, hi_seen = 0, math.inf, -math.inf
    for _ in range(pairs):
        i = int(rng.integers(1, inst.n + 1))
        x = scale * rng.uniform(-1.5, 2.5, inst.dim)
        if rng.random() < 0.5:
            d = rng.standard_normal(inst.dim)
        else:
            # single-coordinate moves isolate the separable (possibly concave) part
            d = np.zeros(inst.dim)
            d[rng.integers(inst.dim)] = 1.0
        y = x + scale * d * rng.choice([1e-3, 0.1, 1.0])
        d = y - x
        nd2 = float(d @ d)
        gap = component_value(inst, i, y) - component_value(inst, i, x) \
            - float(component_gradient(inst, i, x) @ d)
        ratio = 2 * gap / nd2
        slack = tol * (1 + abs(component_value(inst, i, x)) + abs(component_value(inst, i, y))) / nd2
        lo_seen, hi_seen = min(lo_seen, ratio), max(hi_seen, ratio)
        if ratio < lower - 2 * slack or ratio > upper + 2 * slack:
            bad += 1
    return bad, lo_seen, hi_seen


def nc_gradient_floor(inst):
    """Gradient-norm floor on points whose last two coordinates vanish."""
    return inst.nc_alpha ** 0.75 * inst.nc_lambda / (4 * inst.nc_beta)


def nc_gradient_floor_check(inst, points=100, seed=0):
    """Smallest ``||grad F||`` over random points with ``x_m = x_{m+1} = 0``."""
    if inst.family != "NC":
        raise UnsupportedFamilyError("gradient floor applies to the nonconvex family")
    rng = np.random.default_rng(seed)
    worst = math.inf
    for p in range(points):
        u = rng.uniform(-0.5, 1.5, inst.dim)
        # mix in points near 0/1 patterns, where the bump terms are stationary
        if p % 3 == 1:
            u = np.round(u) + 0.05 * rng.standard_normal(inst.dim)
        elif p % 3 == 2:
            u = (np.arange(inst.dim) < rng.integers(0, inst.m)).astype(float)
            u += 0.01 * rng.standard_normal(inst.dim)
        u[inst.m - 1:] = 0.0
        worst = min(worst, float(np.linalg.norm(full_gradient(inst, inst.nc_beta * u))))
    return worst


def nc_descent_check(inst, maxiter=2000):
    """Run L-BFGS from the origin; return ``(F(0) - F(x_found), bound)``."""
    if inst.family != "NC":
        raise UnsupportedFamilyError("descent bound applies to the nonconvex family")
    res = minimize(lambda x: full_value(inst, x), np.zeros(inst.dim),
                   jac=lambda x: full_gradient(inst, x), method="L-BFGS-B",
                   options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
    drop = full_value(inst, np.zeros(inst.dim)) - float(res.fun)
    bound = inst.nc_lambda * (math.sqrt(inst.nc_alpha) / 2 + 10 * inst.nc_alpha * inst.m)
    return drop, bound
