"""Adversarial finite-sum instances with their closed-form minimizers.

Every family shares one component template over ``R^d``::

    f_i(x) = lambda1 * sum_{l in L_i} (b_l^T x)^2 + lambda2 * ||x||^2
             - eta_i * <e_anchor, x>  [+ nonconvex separable term]

with ``eta_1 = lambda0`` and ``eta_i = 0`` otherwise.  The convex families use
tail orientation (``e_anchor = e_m``); the nonconvex family uses head
orientation (``e_anchor = e_1``) and adds
``lambda * alpha * sum_{j <= m} bump(x_j / beta)``.
"""
import json
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import ParameterDomainError, RegimeError, UnsupportedFamilyError
from .structure import BandSpec, Orientation, RowPartition, partition_rows

__all__ = [
    "FAMILIES",
    "SC_EPS_RATIO_MAX",
    "HardInstance",
    "Certificate",
    "make_sc",
    "make_c",
    "make_avg_sc",
    "make_avg_c",
    "make_one_d",
    "make_nc",
    "minimizer",
    "restricted_gap",
    "restricted_min",
    "restricted_min_distance",
    "certificate",
    "base_constants",
    "bump",
    "bump_prime",
    "bump_second",
    "instance_to_dict",
    "instance_from_dict",
    "dumps_instance",
    "loads_instance",
]

FAMILIES = ("SC", "C", "AVG_SC", "AVG_C", "ONE_D", "NC")
CONVEX_FAMILIES = ("SC", "C", "AVG_SC", "AVG_C", "ONE_D")
SC_FAMILIES = ("SC", "AVG_SC")
C_FAMILIES = ("C", "AVG_C")

# (1/9) * ((sqrt2 - 1) / (sqrt2 + 1))**2 ~= 0.00327
SC_EPS_RATIO_MAX = ((math.sqrt(2) - 1) / (math.sqrt(2) + 1)) ** 2 / 9
_SLACK = 1e-12


@dataclass(frozen=True)
class HardInstance:
    """A fully parameterized hard finite sum.

    ``m`` is the chain length.  The vector dimension ``dim`` equals ``m``
    except for the nonconvex family, which lives in ``R^{m+1}``.
    """

    family: str
    n: int
    m: int
    L: float
    mu: float
    lambda0: float
    lambda1: float
    lambda2: float
    omega: float
    Lavg: Optional[float] = None
    Delta: Optional[float] = None
    Bdist: Optional[float] = None
    eps: Optional[float] = None
    alpha: Optional[float] = None
    q: Optional[float] = None
    xi: Optional[float] = None
    sigma: Optional[float] = None
    nc_alpha: Optional[float] = None
    nc_lambda: Optional[float] = None
    nc_beta: Optional[float] = None
    spec: Optional[BandSpec] = field(default=None, init=False, compare=False, repr=False)
    partition: Optional[RowPartition] = field(default=None, init=False, compare=False,
                                              repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.lambda1 >= 0 or not self.lambda2 >= 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if self.family != "ONE_D":
            spec = BandSpec(self.dim, self.omega, self.n)
            object.__setattr__(self, "spec", spec)
            object.__setattr__(self, "partition", partition_rows(spec, self.orientation))

    @property
    def dim(self):
        return self.m + 1 if self.family == "NC" else self.m

    @property
    def orientation(self):
        return Orientation.HEAD if self.family == "NC" else Orientation.TAIL

    @property
    def anchor(self):
        """0-based coordinate of the linear term of component 1."""
        return 0 if self.family == "NC" else self.dim - 1

    @property
    def convex(self):
        return self.family != "NC"

    @property
    def kappa(self):
        return self.L / self.mu if self.mu > 0 else math.inf


@dataclass(frozen=True)
class Certificate:
    """Depth ``M`` whose subspace stays ``>= 9 eps`` away from optimal.

    ``N`` is the query budget below which the expected error is at least
    ``eps``.  For the nonconvex family ``gap_at_M`` is a gradient-norm floor.
    """

    M: int
    N: int
    gap_at_M: float


# -- shared constants ------------------------------------------------------

def base_constants(lambda1, lambda2, n):
    """Smoothness, strong convexity and average smoothness of the template.

    Returns ``(4 lambda1 + 2 lambda2, 2 lambda2, L')`` with
    ``L' = 2 sqrt((4/n) [(lambda1 + lambda2)^2 + lambda1^2] + lambda2^2)``.
    The strong-convexity modulus of ``lambda2 ||x||^2`` is ``2 lambda2``.
    """
    Lavg = 2.0 * math.sqrt(4.0 / n * ((lambda1 + lambda2) ** 2 + lambda1 ** 2)
                           + lambda2 ** 2)
    return 4 * lambda1 + 2 * lambda2, 2 * lambda2, Lavg


def _check_n(n):
    if int(n) != n or n < 2:
        raise ParameterDomainError(f"need an integer n >= 2 components, got {n}")
    return int(n)


def _positive(**kw):
    for name, v in kw.items():
        if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
            raise ParameterDomainError(f"{name} must be a positive finite number, got {v}")


def _le(a, b):
    return a <= b * (1 + _SLACK)


# -- strongly convex -------------------------------------------------------

def _sc_core(family, L, mu, n, Delta, eps, m_raw, Lavg=None):
    alpha = math.sqrt(2.0 * (L / mu - 1.0) / n + 1.0)
    q = (alpha - 1.0) / (alpha + 1.0)
    m = max(2, math.ceil(m_raw))
    lam0 = math.sqrt(2.0 * (L - mu) * n * Delta / (alpha - 1.0))
    xi = math.sqrt(2.0 * Delta * n * (alpha + 1.0) ** 2 / ((L - mu) * (alpha - 1.0)))
    lam1, lam2 = (L - mu) / 4.0, mu / 2.0
    if Lavg is None:
        Lavg = base_constants(lam1, lam2, n)[2]
    inst = HardInstance(family, n, m, L, mu, lam0, lam1, lam2, math.sqrt(2.0 / (alpha + 1.0)),
                        Lavg=Lavg, Delta=Delta, eps=eps, alpha=alpha, q=q, xi=xi)
    M = _sc_depth(inst, eps)
    if M >= m:
        raise RegimeError(f"certified depth M={M} does not fit below dimension m={m}")
    return inst


def _sc_check(L, mu, n, Delta, eps):
    _positive(L=L, mu=mu, Delta=Delta, eps=eps)
    n = _check_n(n)
    if not _le(n / 2 + 1, L / mu):
        raise ParameterDomainError(
            f"strongly convex lower bound requires kappa = L/mu >= n/2 + 1 "
            f"(got kappa={L / mu:.6g}, n/2 + 1={n / 2 + 1:.6g})")
    if not _le(eps / Delta, SC_EPS_RATIO_MAX):
        raise ParameterDomainError(
            f"strongly convex lower bound requires eps/Delta <= "
            f"{SC_EPS_RATIO_MAX:.6g} (got {eps / Delta:.6g})")
    return n


def make_sc(L, mu, n, Delta, eps):
    """Each component L-smooth and mu-strongly convex; ``F(0) - F* = Delta``."""
    n = _sc_check(L, mu, n, Delta, eps)
    alpha = math.sqrt(2.0 * (L / mu - 1.0) / n + 1.0)
    m_raw = 0.25 * alpha * math.log(Delta / (9 * eps)) + 1
    return _sc_core("SC", L, mu, n, Delta, eps, m_raw)


def make_avg_sc(Lavg, mu, n, Delta, eps):
    """Components ``Lavg``-average smooth, average ``mu``-strongly convex."""
    _positive(Lavg=Lavg, mu=mu, Delta=Delta, eps=eps)
    n = _check_n(n)
    if not _le(math.sqrt(3.0 / n) * (n / 2 + 1), Lavg / mu):
        raise ParameterDomainError(
            f"average-smooth strongly convex bound requires Lavg/mu >= "
            f"sqrt(3/n)(n/2 + 1) = {math.sqrt(3.0 / n) * (n / 2 + 1):.6g} "
            f"(got {Lavg / mu:.6g})")
    L = math.sqrt(n * (Lavg ** 2 - mu ** 2) / 2 - mu ** 2)
    # guard the equality case n=2 against rounding just below n/2 + 1
    L = max(L, (n / 2 + 1) * mu)
    _sc_check(L, mu, n, Delta, eps)
    m_raw = 0.25 * math.sqrt(math.sqrt(2.0 / n) * Lavg / mu + 1) * math.log(Delta / (9 * eps)) + 1
    return _sc_core("AVG_SC", L, mu, n, Delta, eps, m_raw, Lavg=Lavg)


# -- convex ----------------------------------------------------------------

def _floor_sqrt_minus_one(ratio):
    r = math.floor(math.sqrt(ratio))
    # sqrt can round an exact perfect square just below the integer
    if (r + 1) ** 2 <= ratio * (1 + _SLACK):
        r += 1
    return r - 1


def _c_core(family, L, Bdist, n, eps, Lavg=None):
    m = _floor_sqrt_minus_one(Bdist ** 2 * L / (24 * n * eps))
    if m < 3:
        raise RegimeError(f"derived dimension m={m} < 3; use the ONE_D family",
                          directive="ONE_D")
    xi = math.sqrt(3) / 2 * Bdist * L / (m + 1) ** 1.5
    if Lavg is None:
        Lavg = base_constants(L / 4, 0.0, n)[2]
    return HardInstance(family, n, m, L, 0.0, xi, L / 4, 0.0, 1.0, Lavg=Lavg,
                        Bdist=Bdist, eps=eps, xi=xi)


def make_c(L, Bdist, n, eps):
    """Each component L-smooth and convex; ``||x0 - x*|| <= Bdist``.

    Raises :class:`RegimeError` directing to ``make_one_d`` when
    ``eps > Bdist^2 L / (384 n)``.
    """
    _positive(L=L, Bdist=Bdist, eps=eps)
    n = _check_n(n)
    if not _le(eps, Bdist ** 2 * L / (384 * n)):
        raise RegimeError(
            f"convex construction needs eps <= B^2 L/(384 n) = "
            f"{Bdist ** 2 * L / (384 * n):.6g}; for larger eps use the ONE_D family",
            directive="ONE_D")
    return _c_core("C", L, Bdist, n, eps)


def make_avg_c(Lavg, Bdist, n, eps):
    """Components ``Lavg``-average smooth with convex average."""
    _positive(Lavg=Lavg, Bdist=Bdist, eps=eps)
    n = _check_n(n)
    if not _le(eps, math.sqrt(2) / 768 * Bdist ** 2 * Lavg / math.sqrt(n)):
        raise RegimeError(
            f"average-smooth convex construction needs eps <= "
            f"(sqrt2/768) B^2 Lavg/sqrt(n); for larger eps use the ONE_D family",
            directive="ONE_D")
    return _c_core("AVG_C", math.sqrt(n / 2) * Lavg, Bdist, n, eps, Lavg=Lavg)


def make_one_d(L, Bdist, n):
    """One-dimensional instance: ``g_1 = (L/2) x^2 - n L B x``, ``g_i = (L/2) x^2``."""
    _positive(L=L, Bdist=Bdist)
    n = _check_n(n)
    return HardInstance("ONE_D", n, 1, L, L, n * L * Bdist, 0.0, L / 2, 0.0, Lavg=L,
                        Delta=L * Bdist ** 2 / 2, Bdist=Bdist)


# -- nonconvex -------------------------------------------------------------

def bump(x):
    """``120 * int_1^x t^2 (t - 1) / (1 + t^2) dt`` in closed form."""
    x = np.asarray(x, dtype=float)
    return 120.0 * (0.5 * (x * x - 1) - (x - 1) + np.arctan(x) - math.pi / 4
                    - 0.5 * np.log(0.5 * (1 + x * x)))


def bump_prime(x):
    x = np.asarray(x, dtype=float)
    return 120.0 * x * x * (x - 1) / (1 + x * x)


def bump_second(x):
    x = np.asarray(x, dtype=float)
    s = 1 + x * x
    return 120.0 * (1 + (x * x - 2 * x - 1) / (s * s))


def make_nc(L, sigma, n, Delta, eps):
    """Nonconvex chain: each component ``(-sigma, L)``-smooth, gap ``<= Delta``."""
    _positive(L=L, sigma=sigma, Delta=Delta, eps=eps)
    n = _check_n(n)
    alpha = min(1.0, (math.sqrt(3) + 1) * n * sigma / (30 * L), n / 180)
    if not _le(eps ** 2, Delta * L * alpha / (81648 * n)):
        raise ParameterDomainError(
            f"nonconvex lower bound requires eps^2 <= Delta L alpha/(81648 n) = "
            f"{Delta * L * alpha / (81648 * n):.6g} (got eps^2={eps ** 2:.6g})")
    lam = 3888 * n * eps ** 2 / (L * alpha ** 1.5)
    beta = math.sqrt(3 * lam * n / L)
    m = max(2, math.floor(Delta * L * math.sqrt(alpha) / (40824 * n * eps ** 2) * (1 + _SLACK)))
    return HardInstance("NC", n, m, L, 0.0, lam * n * math.sqrt(alpha) / beta,
                        lam * n / (2 * beta ** 2), 0.0, alpha ** 0.25, Delta=Delta, eps=eps,
                        sigma=sigma, nc_alpha=alpha, nc_lambda=lam, nc_beta=beta)


# -- closed forms ----------------------------------------------------------

def minimizer(inst):
    """Closed-form ``(x*, F(x*))``; the nonconvex family has none."""
    fam = inst.family
    if fam in SC_FAMILIES:
        powers = np.arange(inst.m, 0, -1)
        return inst.xi * inst.q ** powers, -inst.Delta
    if fam in C_FAMILIES:
        x = 2 * inst.xi / inst.L * np.arange(1, inst.m + 1, dtype=float)
        return x, -inst.m * inst.xi ** 2 / (inst.n * inst.L)
    if fam == "ONE_D":
        return np.array([inst.Bdist]), -inst.L * inst.Bdist ** 2 / 2
    raise UnsupportedFamilyError("the nonconvex family has no closed-form minimizer")


def _check_k(inst, k):
    if int(k) != k or not 0 <= k <= inst.m:
        raise ValueError(f"subspace index k={k} out of range 0..{inst.m}")
    return int(k)


def restricted_gap(inst, k):
    """``min_{x in F_k} F(x) - F(x*)`` in closed form."""
    k = _check_k(inst, k)
    fam = inst.family
    if fam in SC_FAMILIES:
        if k == inst.m:
            return 0.0
        q = inst.q
        return inst.Delta * q ** (2 * k) * (1 + q) / (1 + q ** (2 * k + 1))
    if fam in C_FAMILIES:
        return inst.xi ** 2 * (inst.m - k) / (inst.n * inst.L)
    if fam == "ONE_D":
        return inst.Delta if k == 0 else 0.0
    raise UnsupportedFamilyError("restricted minima are not available for the nonconvex family")


def restricted_min(inst, k):
    """``min_{x in F_k} F(x)``."""
    return minimizer(inst)[1] + restricted_gap(inst, k)


def restricted_min_distance(inst, k):
    """``min_{x in F_k} ||x - x*||^2`` for the strongly convex families."""
    if inst.family not in SC_FAMILIES:
        raise UnsupportedFamilyError("restricted distance is defined for SC families only")
    k = _check_k(inst, k)
    q2 = inst.q ** 2
    return inst.xi ** 2 * (q2 ** (k + 1) - q2 ** (inst.m + 1)) / (1 - q2)


def _sc_depth(inst, eps):
    return math.floor(math.log(9 * eps / inst.Delta) / (2 * math.log(inst.q)))


def certificate(inst, eps=None):
    """Lower-bound certificate ``(M, N)`` for target accuracy ``eps``.

    For ``ONE_D`` the certificate is ``M = 0`` (the origin itself) with
    ``N = floor(n/2)``, valid for ``eps <= L B^2 / 4``.
    """
    eps = inst.eps if eps is None else eps
    if eps is None or not eps > 0:
        raise ParameterDomainError("a positive eps is required")
    fam, n = inst.family, inst.n
    if fam == "ONE_D":
        if not _le(eps, inst.L * inst.Bdist ** 2 / 4):
            raise RegimeError("one-dimensional bound needs eps <= L B^2 / 4")
        return Certificate(0, n // 2, inst.Delta)
    if fam in SC_FAMILIES:
        M = _sc_depth(inst, eps)
        if M >= inst.m:
            raise RegimeError(f"depth M={M} reaches dimension m={inst.m}")
    elif fam in C_FAMILIES:
        M = (inst.m - 1) // 2
    else:
        M = inst.m - 1
    if M < 1:
        raise RegimeError(f"certified depth M={M} < 1 for eps={eps:.6g}")
    if fam == "NC":
        gap = inst.nc_alpha ** 0.75 * inst.nc_lambda / (4 * inst.nc_beta)
    else:
        gap = restricted_gap(inst, M)
    if not gap >= 9 * eps * (1 - _SLACK):
        raise RegimeError(f"gap {gap:.6g} at depth {M} is below 9 eps = {9 * eps:.6g}")
    return Certificate(M, (n * (M + 1)) // 4, gap)


# -- serialization ---------------------------------------------------------

def _hex(v):
    if v is None:
        return None
    return float(v).hex() if isinstance(v, float) else v


def instance_to_dict(inst):
    """JSON-ready dict; floats are stored as hex strings for exact round trips."""
    out = {}
    for f in fields(inst):
        if not f.init:
            continue
        v = getattr(inst, f.name)
        out[f.name] = _hex(float(v)) if isinstance(v, float) else v
    return out


def instance_from_dict(d):
    kw = {}
    for f in fields(HardInstance):
        if not f.init or f.name not in d:
            continue
        v = d[f.name]
        if isinstance(v, str) and f.name != "family":
            v = float.fromhex(v)
        kw[f.name] = v
    return HardInstance(**kw)


def dumps_instance(inst, **extra):
    d = instance_to_dict(inst)
    d.update(extra)
    return json.dumps(d, indent=2)


def loads_instance(text):
    return instance_from_dict(json.loads(text))
