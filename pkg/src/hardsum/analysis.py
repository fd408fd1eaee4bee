"""Stopping times, geometric-sum tails and complexity fits.

The stopping times of a component-index sequence are ``T_0 = 0`` and
``T_k = min{t > T_{k-1} : i_t = k (mod n)}`` with 1-based steps ``t``.  Under
i.i.d. sampling the increments ``T_k - T_{k-1}`` are independent geometric
variables with success probability ``p_{k'}``, ``k' = k (mod n)``.
"""
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .instances import certificate
from .solvers import RunTrace, sample_indices

__all__ = [
    "GeoSumModel",
    "TailReport",
    "FitSummary",
    "stopping_times",
    "simulate_stopping_times",
    "two_geo_tail",
    "averaging_dominance_check",
    "geo_sum_tail_mc",
    "certificate_tail_check",
    "fit_complexity",
]


@dataclass(frozen=True)
class GeoSumModel:
    """Independent geometric variables ``Y_l ~ Geo(q_l)``, ``l = 1..K``."""

    probs: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in self.probs)
        if not q:
            raise ValueError("need at least one geometric variable")
        if any(not 0 < v <= 1 for v in q):
            raise ValueError("success probabilities must lie in (0, 1]")
        object.__setattr__(self, "probs", q)

    @classmethod
    def from_scheme(cls, probs, K):
        """``q_l = p_{l'}`` with ``l' = l (mod n)``, the increments of ``T_1..T_K``."""
        n = len(probs)
        return cls(tuple(probs[(l - 1) % n] for l in range(1, K + 1)))

    @property
    def K(self):
        return len(self.probs)

    def lemma_threshold(self):
        """``K^2 / (4 sum q)``, below which the sum stays with probability ``>= 1 - 16/(9K)``."""
        return self.K ** 2 / (4 * sum(self.probs))


@dataclass(frozen=True)
class TailReport:
    threshold: float
    empirical_prob: float
    trials: int
    bound: float
    sigma_hat: float

    def passes(self, n_sigma=3.0):
        return self.empirical_prob >= self.bound - n_sigma * self.sigma_hat

    def to_json(self):
        return json.dumps(asdict(self))


def _report(threshold, hits, trials, bound):
    p = hits / trials
    return TailReport(float(threshold), float(p), int(trials), float(bound),
                      math.sqrt(p * (1 - p) / trials))


# -- stopping times -----------------------------------------------------------

def stopping_times(trace, n, K):
    """``[T_1, ..., T_K]`` from a trace or index sequence; None marks censoring."""
    idx = trace.indices if isinstance(trace, RunTrace) else np.asarray(trace)
    if n < 2:
        raise ValueError("need n >= 2")
    out, k = [], 1
    for t, i in enumerate(idx, start=1):
        if k > K:
            break
        if (int(i) - k) % n == 0:
            out.append(t)
            k += 1
    return out + [None] * (K - len(out))


def _scan(idx, n, K):
    """Vectorized stopping times over rows of ``idx``; 0 marks censoring."""
    trials, horizon = idx.shape
    k = np.ones(trials, dtype=np.int64)
    T = np.zeros((trials, K), dtype=np.int64)
    rows = np.arange(trials)
    for t in range(horizon):
        hit = (k <= K) & ((idx[:, t] - k) % n == 0)
        T[rows[hit], k[hit] - 1] = t + 1
        k += hit
    return T


def simulate_stopping_times(scheme, K, trials, horizon, chunk=20000):
    """Stopping times of ``trials`` independent index streams of length ``horizon``.

    Trial ``r`` uses stream positions ``r * horizon + 1 ... (r + 1) * horizon``
    of ``scheme``.  Returns an integer array of shape ``(trials, K)`` with 0
    for times beyond the horizon.
    """
    out = []
    for start in range(0, trials, chunk):
        rows = min(chunk, trials - start)
        idx = sample_indices(scheme, start * horizon + 1, rows * horizon).reshape(rows, horizon)
        out.append(_scan(idx, scheme.n, K))
    return np.vstack(out)


# -- two geometric variables -----------------------------------------------

def _check_p(p):
    if not 0 < p <= 1:
        raise ValueError(f"probability must lie in (0, 1], got {p}")


def two_geo_tail(p1, p2, j):
    """Exact ``P(X_1 + X_2 > j)`` for independent ``X_l ~ Geo(p_l)`` on ``{1, 2, ...}``."""
    _check_p(p1)
    _check_p(p2)
    if int(j) != j or j < 1:
        raise ValueError(f"j must be a positive integer, got {j}")
    j = int(j)
    a1, a2 = 1 - p1, 1 - p2
    diff = abs(p1 - p2)
    if diff <= 1e-12 * max(p1, p2):
        p, a = 0.5 * (p1 + p2), 0.5 * (a1 + a2)
        return j * p * a ** (j - 1) + a ** j
    if diff <= 1e-3 * max(p1, p2):
        # (p2 a1^j - p1 a2^j)/(p2 - p1) = a1^j + p1 * sum_l a1^l a2^(j-1-l)
        l = np.arange(j)
        return a1 ** j + p1 * float(np.sum(a1 ** l * a2 ** (j - 1 - l)))
    return (p2 * a1 ** j - p1 * a2 ** j) / (p2 - p1)


def averaging_dominance_check(p1, p2, j, trials=None):
    """Whether ``P(X_1 + X_2 > j) >= P(Y_1 + Y_2 > j)`` with ``Y ~ Geo((p1+p2)/2)``.

    Both sides are exact; ``trials`` is accepted for interface symmetry and
    ignored.
    """
    if not 0 < p1 <= p2 <= 1:
        raise ValueError("need 0 < p1 <= p2 <= 1")
    pbar = 0.5 * (p1 + p2)
    return two_geo_tail(p1, p2, j) >= two_geo_tail(pbar, pbar, j) - 1e-12


# -- Monte Carlo tails ------------------------------------------------------

def geo_sum_tail_mc(model, threshold, trials, seed, bound=None, chunk=100000):
    """Empirical ``P(sum_l Y_l > threshold)`` with its binomial standard error.

    ``bound`` defaults to ``1 - 16/(9K)``, the guarantee at the threshold
    :meth:`GeoSumModel.lemma_threshold`.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    rng = np.random.Generator(np.random.Philox(key=seed))
    q = np.asarray(model.probs)
    hits = 0
    for start in range(0, trials, chunk):
        rows = min(chunk, trials - start)
        sums = rng.geometric(q, size=(rows, q.size)).sum(axis=1)
        hits += int(np.count_nonzero(sums > threshold))
    if bound is None:
        bound = max(0.0, 1 - 16 / (9 * model.K))
    return _report(threshold, hits, trials, bound)


def certificate_tail_check(inst, scheme, trials, seed=None):
    """Empirical ``P(T_{M+1} > N)`` from simulated index streams.

    Uses the instance certificate ``(M, N)`` with guarantee ``1/9``.  For the
    one-dimensional family the event is ``T_1 > floor(1/(2 p_1))`` with
    guarantee ``1/2``.
    """
    if seed is not None:
        scheme = replace(scheme, seed=seed)
    if inst.family == "ONE_D":
        K, N, bound = 1, int(math.floor(1 / (2 * scheme.probs[0]))), 0.5
    else:
        cert = certificate(inst)
        K, N, bound = cert.M + 1, cert.N, 1 / 9
    if N == 0:
        return _report(0, trials, trials, bound)
    T = simulate_stopping_times(scheme, K, trials, N)
    # T_{K} > N exactly when the K-th stopping time is censored at horizon N
    hits = int(np.count_nonzero(T[:, K - 1] == 0))
    return _report(N, hits, trials, bound)


# -- complexity fit -----------------------------------------------------------

@dataclass(frozen=True)
class FitSummary:
    """Least-squares fit ``queries ~ a n log(D/e) + b sqrt(n kappa) log(D/e)``."""

    a: float
    b: float
    r2: float
    records: int

    def predict(self, n, kappa, eps, Delta=1.0):
        ell = math.log(Delta / eps)
        return self.a * n * ell + self.b * math.sqrt(n * kappa) * ell

    def to_json(self):
        return json.dumps(asdict(self))


def fit_complexity(records, Delta=1.0):
    """Fit measured queries-to-eps against the two-term complexity law.

    Parameters
    ----------
    records : iterable of (n, kappa, eps, queries)
        At least six records spanning two or more values of ``n`` and of
        ``kappa``.
    Delta : float
        Initial gap used in ``log(Delta / eps)``.
    """
    rec = np.array([[float(v) for v in r] for r in records], dtype=float)
    if rec.ndim != 2 or rec.shape[0] < 6 or rec.shape[1] != 4:
        raise ValueError("need at least 6 records of (n, kappa, eps, queries)")
    n, kappa, eps, y = rec.T
    if np.unique(n).size < 2 or np.unique(kappa).size < 2:
        raise ValueError("records must span at least two values of n and of kappa")
    ell = np.log(Delta / eps)
    X = np.column_stack([n * ell, np.sqrt(n * kappa) * ell])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 2:
        raise ValueError("degenerate design: the two complexity terms are collinear")
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return FitSummary(float(coef[0]), float(coef[1]), r2, int(rec.shape[0]))
