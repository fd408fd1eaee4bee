"""Span-model runner, seeded component sampling and reference PIFO algorithms.

Every algorithm starts at ``x_0 = 0`` and touches the instance only through
:class:`~hardsum.oracle.Oracle`, so the query count in a trace is exactly
the number of oracle calls.  Algorithms are generators: each oracle call is
followed by one ``yield`` of the current iterate, which the runner records.
"""
import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import UnsupportedFamilyError
from .instances import minimizer
from .oracle import Oracle, full_gradient, full_value, nc_gamma_limit
from .structure import subspace_index

__all__ = [
    "SamplingScheme",
    "AlgorithmSpec",
    "RunTrace",
    "ALGORITHMS",
    "sample_index",
    "sample_indices",
    "run",
    "greedy_span_probe",
    "queries_to_eps",
    "point_saga_gamma",
    "SpanViolation",
]

ALGORITHMS = ("prox_point", "sgd", "svrg", "saga", "point_saga")


# -- sampling ----------------------------------------------------------------

@dataclass(frozen=True)
class SamplingScheme:
    """Distribution ``P(i_t = j) = p_j`` over components plus a stream seed.

    ``probs`` must be positive, sum to one and be nondecreasing, so ``p_1``
    is always the smallest probability.
    """

    probs: tuple
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("need at least two component probabilities")
        if np.any(p <= 0):
            raise ValueError("every component probability must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1 (got {p.sum():.17g})")
        if np.any(np.diff(p) < 0):
            raise ValueError("probabilities must be sorted in nondecreasing order")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def uniform(cls, n, seed=0):
        return cls(tuple([1.0 / n] * n), seed)

    @property
    def n(self):
        return len(self.probs)

    @property
    def cdf(self):
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c


def _raw_stream(seed, start, count):
    """``count`` raw 64-bit words starting at stream position ``start``."""
    block, offset = divmod(start, 4)
    bg = np.random.Philox(key=seed, counter=block)
    return bg.random_raw(offset + count)[offset:]


def sample_indices(scheme, start, count):
    """1-based component indices for steps ``start, ..., start + count - 1``.

    The draw for step ``t`` depends only on ``(seed, t)``, so any window of
    the stream can be regenerated independently.
    """
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    raw = _raw_stream(scheme.seed, int(start), int(count))
    u = (raw >> np.uint64(11)).astype(float) * 2.0 ** -53
    idx = np.searchsorted(scheme.cdf, u, side="right") + 1
    return np.minimum(idx, scheme.n).astype(np.int64)


def sample_index(scheme, t):
    return int(sample_indices(scheme, t, 1)[0])


class _Sampler:
    def __init__(self, scheme, chunk=4096):
        self.scheme, self.chunk = scheme, chunk
        self.t, self.buf, self.pos = 1, np.zeros(0, dtype=np.int64), 0

    def __call__(self):
        if self.pos >= self.buf.size:
            self.buf = sample_indices(self.scheme, self.t, self.chunk)
            self.t += self.chunk
            self.pos = 0
        i = int(self.buf[self.pos])
        self.pos += 1
        return i


# -- algorithms ---------------------------------------------------------------

@dataclass(frozen=True)
class AlgorithmSpec:
    """Reference algorithm and its hyperparameters.

    Defaults (``None``) resolve per instance: SGD step ``1/(2L)``, SVRG step
    ``1/(4L)`` with epoch ``2n``, SAGA step ``1/(3L)``, stochastic proximal
    point ``gamma = 1/L`` and Point-SAGA ``gamma`` from
    :func:`point_saga_gamma`.  On the nonconvex family prox steps default to
    half of the admissible limit.
    """

    name: str
    step: Optional[float] = None
    gamma: Optional[float] = None
    epoch: Optional[int] = None
    debug_span: bool = False

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")


def point_saga_gamma(n, L, mu):
    """Point-SAGA step size for ``L``-smooth, ``mu``-strongly convex components."""
    if mu > 0:
        return math.sqrt((n - 1) ** 2 + 4 * n * L / mu) / (2 * L * n) - (1 - 1 / n) / (2 * L)
    return 1.0 / L


def _prox_gamma(inst, algo, default):
    if algo.gamma is not None:
        return algo.gamma
    if inst.family == "NC":
        return 0.5 * nc_gamma_limit(inst)
    return default


def _prox_point(inst, algo, oracle, draw):
    gamma = _prox_gamma(inst, algo, 1.0 / inst.L)
    x = np.zeros(inst.dim)
    while True:
        x = oracle(draw(), x, gamma).prox_point
        yield x


def _sgd(inst, algo, oracle, draw):
    step = algo.step or 1.0 / (2 * inst.L)
    x = np.zeros(inst.dim)
    while True:
        x = x - step * oracle(draw(), x).gradient
        yield x


def _svrg(inst, algo, oracle, draw):
    step = algo.step or 1.0 / (4 * inst.L)
    epoch = algo.epoch or 2 * inst.n
    x = np.zeros(inst.dim)
    while True:
        snap = x.copy()
        table = []
        for i in range(1, inst.n + 1):
            table.append(oracle(i, snap).gradient)
            yield x
        mean = np.mean(table, axis=0)
        for _ in range(epoch):
            i = draw()
            g = oracle(i, x).gradient
            x = x - step * (g - table[i - 1] + mean)
            yield x


def _saga(inst, algo, oracle, draw):
    step = algo.step or 1.0 / (3 * inst.L)
    x = np.zeros(inst.dim)
    table = []
    for i in range(1, inst.n + 1):
        table.append(oracle(i, x).gradient)
        yield x
    table = np.array(table)
    mean = table.mean(axis=0)
    while True:
        j = draw()
        g = oracle(j, x).gradient
        x = x - step * (g - table[j - 1] + mean)
        mean = mean + (g - table[j - 1]) / inst.n
        table[j - 1] = g
        yield x


def _point_saga(inst, algo, oracle, draw):
    gamma = _prox_gamma(inst, algo, point_saga_gamma(inst.n, inst.L, inst.mu))
    x = np.zeros(inst.dim)
    table = []
    for i in range(1, inst.n + 1):
        table.append(oracle(i, x).gradient)
        yield x
    table = np.array(table)
    mean = table.mean(axis=0)
    while True:
        j = draw()
        z = x + gamma * (table[j - 1] - mean)
        x = oracle(j, z, gamma).prox_point
        g = (z - x) / gamma
        mean = mean + (g - table[j - 1]) / inst.n
        table[j - 1] = g
        yield x


_IMPL = {"prox_point": _prox_point, "sgd": _sgd, "svrg": _svrg, "saga": _saga,
         "point_saga": _point_saga}


# -- traces -------------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-query record of a run, with a ``t = 0`` row for ``x_0 = 0``.

    ``metric`` is ``"subopt"`` (``F(x_t) - F*``) for the convex families and
    ``"grad_norm"`` (``||grad F(x_t)||``) for the nonconvex family.  ``i_t`` is
    0 and ``gamma_t`` is NaN where not applicable.
    """

    family: str
    n: int
    metric: str
    t: np.ndarray
    i_t: np.ndarray
    gamma_t: np.ndarray
    queries: np.ndarray
    value: np.ndarray
    k: np.ndarray
    x_final: np.ndarray = field(repr=False)

    @property
    def indices(self):
        """Queried component indices ``i_1, i_2, ...``."""
        return self.i_t[1:]

    def rows(self):
        for r in zip(self.t, self.i_t, self.gamma_t, self.queries, self.value, self.k):
            yield int(r[0]), int(r[1]), float(r[2]), int(r[3]), float(r[4]), int(r[5])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "i_t", "gamma_t", "queries", self.metric, "k"])
            for t, i, g, q, v, k in self.rows():
                w.writerow([t, i, "" if math.isnan(g) else repr(g), q, repr(v), k])


class SpanViolation(AssertionError):
    """An iterate left the span of past iterates and oracle outputs."""


class _SpanTracker:
    def __init__(self, dim):
        self.basis = np.zeros((dim, 0))

    def _residual(self, v):
        r = v - self.basis @ (self.basis.T @ v)
        return r - self.basis @ (self.basis.T @ r)

    def add(self, v):
        nv = float(np.linalg.norm(v))
        if nv == 0:
            return
        r = self._residual(v)
        if np.linalg.norm(r) > 1e-10 * nv:
            self.basis = np.column_stack([self.basis, r / np.linalg.norm(r)])

    def check(self, x, t):
        res = float(np.linalg.norm(self._residual(x)))
        if res > 1e-10 * (1.0 + float(np.linalg.norm(x))):
            raise SpanViolation(f"iterate at step {t} is off-span by {res:.3e}")


class _Recorder:
    def __init__(self, inst, budget):
        self.inst = inst
        self.nc = inst.family == "NC"
        self.fstar = None if self.nc else minimizer(inst)[1]
        size = budget + 1
        self.i_t = np.zeros(size, dtype=np.int64)
        self.gamma_t = np.full(size, np.nan)
        self.value = np.zeros(size)
        self.k = np.zeros(size, dtype=np.int64)
        self.n_rows = 0

    def record(self, x, i=0, gamma=None):
        r = self.n_rows
        self.i_t[r] = i
        self.gamma_t[r] = np.nan if gamma is None else gamma
        if self.nc:
            self.value[r] = float(np.linalg.norm(full_gradient(self.inst, x)))
        else:
            self.value[r] = full_value(self.inst, x) - self.fstar
        self.k[r] = subspace_index(x, self.inst.orientation)
        self.n_rows += 1

    def trace(self, x_final):
        r = self.n_rows
        t = np.arange(r, dtype=np.int64)
        return RunTrace(self.inst.family, self.inst.n, "grad_norm" if self.nc else "subopt",
                        t, self.i_t[:r].copy(), self.gamma_t[:r].copy(), t.copy(),
                        self.value[:r].copy(), self.k[:r].copy(), np.array(x_final))


class _LoggingOracle(Oracle):
    def __init__(self, inst, tracker=None):
        super().__init__(inst)
        self.tracker = tracker
        self.last = None

    def __call__(self, i, x, gamma=None):
        reply = super().__call__(i, x, gamma)
        self.last = (i, gamma)
        if self.tracker is not None:
            self.tracker.add(reply.gradient)
            if reply.prox_point is not None:
                self.tracker.add(reply.prox_point)
        return reply


def run(inst, algo, scheme, budget, seed=None, stop_at=None):
    """Run ``algo`` on ``inst`` for exactly ``budget`` oracle queries.

    ``seed``, when given, replaces the seed of ``scheme``.  With ``stop_at``
    the run ends early once the recorded metric drops to ``stop_at`` or
    below.  Oracle errors are re-raised with the failing step attached.
    """
    if int(budget) != budget or budget < 1:
        raise ValueError(f"budget must be a positive integer, got {budget}")
    if scheme.n != inst.n:
        raise ValueError(f"scheme has {scheme.n} components, instance has {inst.n}")
    if seed is not None:
        scheme = replace(scheme, seed=seed)
    tracker = _SpanTracker(inst.dim) if algo.debug_span else None
    oracle = _LoggingOracle(inst, tracker)
    rec = _Recorder(inst, budget)
    x = np.zeros(inst.dim)
    rec.record(x)
    steps = _IMPL[algo.name](inst, algo, oracle, _Sampler(scheme))
    while oracle.calls < budget:
        try:
            x = next(steps)
        except Exception as exc:
            if exc.args and isinstance(exc.args[0], str):
                exc.args = (f"{exc.args[0]} (while running {algo.name} at query "
                            f"{oracle.calls + 1})",) + exc.args[1:]
            raise
        if tracker is not None:
            tracker.add(x)
            tracker.check(x, oracle.calls)
        rec.record(x, *oracle.last)
        if stop_at is not None and rec.value[rec.n_rows - 1] <= stop_at:
            break
    return rec.trace(x)


def queries_to_eps(trace, eps):
    """First query count whose iterate reaches ``value <= eps``; None if censored."""
    hit = np.flatnonzero(trace.value <= eps)
    return int(trace.queries[hit[0]]) if hit.size else None


# -- favorable span probe -----------------------------------------------------

def greedy_span_probe(inst, scheme, budget, seed=None, gamma=None):
    """Best point of the accumulated span after each sampled prox query.

    At every step the sampled component is queried (prox and gradient) at the
    current iterate; both outputs join the span, and the next iterate is the
    exact minimizer of ``F`` over that span.  This is as favorable as a span
    algorithm can be for a given index sequence.  Convex families only.
    """
    if not inst.convex:
        raise UnsupportedFamilyError("the greedy span probe needs a quadratic objective")
    if seed is not None:
        scheme = replace(scheme, seed=seed)
    gamma = 1.0 / inst.L if gamma is None else gamma
    rec = _Recorder(inst, budget)
    x = np.zeros(inst.dim)
    rec.record(x)
    oracle = Oracle(inst)
    draw = _Sampler(scheme)
    basis = np.zeros((inst.dim, 0))
    g0 = full_gradient(inst, np.zeros(inst.dim))
    while oracle.calls < budget:
        i = draw()
        reply = oracle(i, x, gamma)
        for v in (reply.gradient, reply.prox_point):
            r = v - basis @ (basis.T @ v)
            r = r - basis @ (basis.T @ r)
            if np.linalg.norm(r) > 1e-12 * (1.0 + np.linalg.norm(v)):
                basis = np.column_stack([basis, r / np.linalg.norm(r)])
        if basis.shape[1]:
            # F is quadratic: grad F(x) = H x + g0
            HQ = np.column_stack([full_gradient(inst, q) - g0 for q in basis.T])
            c = np.linalg.solve(basis.T @ HQ, -basis.T @ g0)
            x = basis @ c
            # snap round-off outside the reachable coordinates back to zero
            x[np.all(np.abs(basis) == 0, axis=1)] = 0.0
        rec.record(x, i, gamma)
    return rec.trace(x)
