"""Proximal incremental first-order oracle for the hard instances.

A call ``pifo_call(inst, i, x, gamma)`` returns
``[f_i(x), grad f_i(x), prox_{f_i}^gamma(x)]`` where
``prox_{f}^gamma(x) = argmin_u f(u) + ||x - u||^2 / (2 gamma)``.
Passing ``gamma=None`` gives the incremental first-order reply (no prox).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ProxValidityError
from .instances import bump, bump_prime, bump_second
from .rootfind import solve_increasing
from .structure import apply_group_gram, solve_shifted_group_gram

__all__ = [
    "OracleReply",
    "ProxBlock",
    "Oracle",
    "component_value",
    "component_gradient",
    "component_prox",
    "pifo_call",
    "full_value",
    "full_gradient",
    "nc_gamma_limit",
    "prox_blocks",
    "block_residual",
]


@dataclass(frozen=True)
class OracleReply:
    value: float
    gradient: np.ndarray
    prox_point: Optional[np.ndarray]
    gamma: Optional[float]


@dataclass(frozen=True)
class ProxBlock:
    """One independent piece of the nonconvex prox system, in scaled units.

    A ``single`` block solves ``a u + r h bump'(u) = y`` for one coordinate; a
    ``pair`` block couples two adjacent coordinates through ``c (u1 - u2)``.
    ``h`` flags coordinates carrying the nonconvex term.
    """

    kind: str
    coords: tuple
    a: tuple
    c: float
    r: float
    h: tuple
    y: tuple


def _check(inst, i, x):
    if not 1 <= i <= inst.n:
        raise IndexError(f"component index {i} out of range 1..{inst.n}")
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.dim,):
        raise ValueError(f"expected a vector of length {inst.dim}, got shape {x.shape}")
    return x


def _gram(inst, i, x):
    if inst.family == "ONE_D":
        return np.zeros_like(x)
    return apply_group_gram(inst.spec, inst.partition, i, x)


def _nc_mask(inst):
    h = np.ones(inst.dim)
    h[inst.m:] = 0.0  # the last coordinate carries no bump term
    return h


def component_value(inst, i, x):
    x = _check(inst, i, x)
    v = inst.lambda1 * float(x @ _gram(inst, i, x)) + inst.lambda2 * float(x @ x)
    if i == 1:
        v -= inst.lambda0 * x[inst.anchor]
    if inst.family == "NC":
        lam, a, b = inst.nc_lambda, inst.nc_alpha, inst.nc_beta
        v += lam * a * float(np.sum(bump(x[:inst.m] / b)))
    return v


def component_gradient(inst, i, x):
    x = _check(inst, i, x)
    g = 2 * inst.lambda1 * _gram(inst, i, x) + 2 * inst.lambda2 * x
    if i == 1:
        g[inst.anchor] -= inst.lambda0
    if inst.family == "NC":
        lam, a, b = inst.nc_lambda, inst.nc_alpha, inst.nc_beta
        g[:inst.m] += lam * a / b * bump_prime(x[:inst.m] / b)
    return g


def nc_gamma_limit(inst):
    """Largest admissible prox step for the nonconvex family (exclusive)."""
    return (math.sqrt(3) + 1) / 90 * inst.nc_beta ** 2 / (inst.nc_lambda * inst.nc_alpha)


def component_prox(inst, i, x, gamma):
    x = _check(inst, i, x)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ProxValidityError(f"gamma must be positive and finite, got {gamma}")
    if inst.family == "NC":
        return _nc_prox(inst, i, x, gamma)
    d = 2 * inst.lambda2 + 1.0 / gamma
    c1 = 1.0 / d
    y = x / gamma
    if i == 1:
        y[inst.anchor] += inst.lambda0
    if inst.family == "ONE_D":
        return c1 * y
    c2 = 2 * inst.lambda1 / d
    return c1 * solve_shifted_group_gram(inst.spec, inst.partition, i, c2, y)


# -- nonconvex prox ----------------------------------------------------------

def _nc_system(inst, i, x, gamma):
    """Scaled prox system ``u + c B_i^T B_i u + r h bump'(u) = y``, ``u = v / beta``."""
    limit = nc_gamma_limit(inst)
    if not gamma < limit * (1 - 1e-12):
        raise ProxValidityError(
            f"gamma={gamma:.6g} must be below {limit:.6g} for the nonconvex prox to be "
            f"well defined")
    beta = inst.nc_beta
    c = 2 * gamma * inst.lambda1
    r = gamma * inst.nc_lambda * inst.nc_alpha / beta ** 2
    y = x / beta
    if i == 1:
        y = y.copy()
        y[0] += gamma * inst.lambda0 / beta
    gi = i - 1
    lo = inst.partition._lo[gi]
    a = np.ones(inst.dim)
    if inst.partition._corner[gi]:
        a[0] += c * inst.omega ** 2
    single = np.ones(inst.dim, dtype=bool)
    single[lo] = False
    single[lo + 1] = False
    return c, r, a, y, lo, np.flatnonzero(single)


def prox_blocks(inst, i, x, gamma):
    """Decompose the nonconvex prox of component ``i`` at ``x`` into blocks."""
    c, r, a, y, lo, singles = _nc_system(inst, i, x, gamma)
    h = _nc_mask(inst)
    blocks = [ProxBlock("single", (int(s),), (a[s],), 0.0, r, (h[s],), (y[s],))
              for s in singles]
    blocks += [ProxBlock("pair", (int(s), int(s) + 1), (a[s], a[s + 1]), c, r,
                         (h[s], h[s + 1]), (y[s], y[s + 1])) for s in lo]
    return sorted(blocks, key=lambda b: b.coords)


def _solve_singles(a, r, h, y):
    def fun(u):
        return (a * u + r * h * bump_prime(u) - y,
                a + r * h * bump_second(u))
    return solve_increasing(fun, y.size, 1.0 + np.abs(y))


def _solve_pairs(a1, a2, c, r, h1, h2, y1, y2):
    """Nested scalar solves: ``u2`` as an increasing function of ``u1``."""
    def inner(u1):
        def fun(u2):
            return (a2 * u2 + c * (u2 - u1) + r * h2 * bump_prime(u2) - y2,
                    a2 + c + r * h2 * bump_second(u2))
        return solve_increasing(fun, y2.size, 1.0 + np.abs(y2) + c * np.abs(u1))

    state = {}

    def outer(u1):
        u2 = inner(u1)
        state["u2"], state["u1"] = u2, u1
        d2 = a2 + c + r * h2 * bump_second(u2)
        f = a1 * u1 + c * (u1 - u2) + r * h1 * bump_prime(u1) - y1
        df = a1 + c + r * h1 * bump_second(u1) - c * c / d2
        return f, df

    scale = 1.0 + np.abs(y1) + np.abs(y2)
    u1 = solve_increasing(outer, y1.size, scale)
    if state.get("u1") is not u1:
        outer(u1)
    return u1, state["u2"]


def block_residual(block, u):
    """Residual of a block system at ``u`` (scalar or length-2)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    a, h, y = np.array(block.a), np.array(block.h), np.array(block.y)
    res = a * u + block.r * h * bump_prime(u) - y
    if block.kind == "pair":
        res = res + block.c * np.array([u[0] - u[1], u[1] - u[0]])
    return res


def _nc_prox(inst, i, x, gamma):
    c, r, a, y, lo, singles = _nc_system(inst, i, x, gamma)
    h = _nc_mask(inst)
    u = np.zeros(inst.dim)
    if singles.size:
        u[singles] = _solve_singles(a[singles], r, h[singles], y[singles])
    if lo.size:
        hi = lo + 1
        u[lo], u[hi] = _solve_pairs(a[lo], a[hi], c, r, h[lo], h[hi], y[lo], y[hi])
    return inst.nc_beta * u


# -- assembled calls ---------------------------------------------------------

def pifo_call(inst, i, x, gamma=None):
    """Value, gradient and (if ``gamma`` is given) prox of component ``i``."""
    x = _check(inst, i, x)
    prox = None if gamma is None else component_prox(inst, i, x, gamma)
    return OracleReply(component_value(inst, i, x), component_gradient(inst, i, x), prox,
                       gamma)


class Oracle:
    """Query-counting front end owned by a single run."""

    def __init__(self, inst):
        self.inst = inst
        self.calls = 0

    def __call__(self, i, x, gamma=None):
        reply = pifo_call(self.inst, i, x, gamma)
        self.calls += 1
        return reply


def _band_sq(inst, x):
    d = np.diff(x)
    return float(d @ d) + (inst.omega * x[0]) ** 2


def _band_gram(inst, x):
    d = np.diff(x)
    g = np.zeros_like(x)
    g[1:] += d
    g[:-1] -= d
    g[0] += inst.omega ** 2 * x[0]
    return g


def full_value(inst, x):
    """``F(x) = (1/n) sum_i f_i(x)`` evaluated in ``O(dim)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.dim,):
        raise ValueError(f"expected a vector of length {inst.dim}, got shape {x.shape}")
    v = inst.lambda2 * float(x @ x) - inst.lambda0 / inst.n * x[inst.anchor]
    if inst.family != "ONE_D":
        v += inst.lambda1 / inst.n * _band_sq(inst, x)
    if inst.family == "NC":
        v += inst.nc_lambda * inst.nc_alpha * float(np.sum(bump(x[:inst.m] / inst.nc_beta)))
    return v


def full_gradient(inst, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.dim,):
        raise ValueError(f"expected a vector of length {inst.dim}, got shape {x.shape}")
    g = 2 * inst.lambda2 * x
    g[inst.anchor] -= inst.lambda0 / inst.n
    if inst.family != "ONE_D":
        g += 2 * inst.lambda1 / inst.n * _band_gram(inst, x)
    if inst.family == "NC":
        lam, a, b = inst.nc_lambda, inst.nc_alpha, inst.nc_beta
        g[:inst.m] += lam * a / b * bump_prime(x[:inst.m] / b)
    return g
