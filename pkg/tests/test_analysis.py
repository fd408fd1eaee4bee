import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from hardsum.analysis import (FitSummary, GeoSumModel, averaging_dominance_check,
                              certificate_tail_check, fit_complexity, geo_sum_tail_mc,
                              simulate_stopping_times, stopping_times, two_geo_tail)
from hardsum.instances import make_one_d, make_sc
from hardsum.solvers import SamplingScheme
from hardsum.verify import two_geo_enumerated


def test_stopping_times_hand_example():
    # n = 3: T_1 is the first index 1, T_2 the next 2, T_3 the next 3, T_4 the next 1
    assert stopping_times([2, 1, 3, 2, 2, 3, 1], 3, 4) == [2, 4, 6, 7]
    assert stopping_times([2, 1, 3], 3, 3) == [2, None, None]


def test_stopping_times_wraps_mod_n():
    assert stopping_times([1, 2, 1, 2], 2, 4) == [1, 2, 3, 4]


def test_increments_are_geometric():
    n, K, trials = 4, 3, 100000
    s = SamplingScheme((0.1, 0.2, 0.3, 0.4), 17)
    T = simulate_stopping_times(s, K, trials, 200)
    assert np.all(T[:, -1] > 0)
    inc = np.diff(np.column_stack([np.zeros(trials, dtype=int), T]), axis=1)
    for k in range(K):
        q = s.probs[k % n]
        x = inc[:, k]
        top = 12
        obs = np.array([np.count_nonzero(x == v) for v in range(1, top)]
                       + [np.count_nonzero(x >= top)])
        pmf = np.array([q * (1 - q) ** (v - 1) for v in range(1, top)] + [(1 - q) ** (top - 1)])
        assert stats.chisquare(obs, pmf * trials).pvalue > 0.01


def test_expected_stopping_time():
    s = SamplingScheme.uniform(5, 3)
    T = simulate_stopping_times(s, 6, 100000, 200)
    last = T[:, -1]
    assert np.all(last > 0)
    se = last.std(ddof=1) / math.sqrt(last.size)
    assert abs(last.mean() - 6 * 5) <= 3 * se


def test_simulated_matches_scalar_scan():
    s = SamplingScheme.uniform(3, 8)
    T = simulate_stopping_times(s, 4, 5, 30)
    from hardsum.solvers import sample_indices
    for r in range(5):
        idx = sample_indices(s, r * 30 + 1, 30)
        ref = [0 if v is None else v for v in stopping_times(idx, 3, 4)]
        assert list(T[r]) == ref


def test_two_geo_hand_values():
    assert two_geo_tail(0.5, 0.5, 2) == pytest.approx(0.75)
    for p1, p2 in [(0.1, 0.9), (0.3, 0.3), (1.0, 0.2)]:
        assert two_geo_tail(p1, p2, 1) == pytest.approx(1.0)


def test_two_geo_monte_carlo():
    rng = np.random.default_rng(0)
    x = rng.geometric(0.3, 10 ** 6) + rng.geometric(0.6, 10 ** 6)
    emp = np.mean(x > 5)
    p = two_geo_tail(0.3, 0.6, 5)
    assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / 10 ** 6)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.integers(1, 40))
def test_two_geo_matches_enumeration(p1, p2, j):
    assert two_geo_tail(p1, p2, j) == pytest.approx(two_geo_enumerated(p1, p2, j), abs=1e-10)


@given(st.floats(0.01, 0.99), st.floats(-1e-9, 1e-9), st.integers(1, 60))
def test_two_geo_near_equal_continuous(p, dp, j):
    a = two_geo_tail(p, p, j)
    b = two_geo_tail(p, min(1.0, max(1e-3, p + dp)), j)
    assert a == pytest.approx(b, abs=1e-7)


@given(st.floats(0.02, 0.98), st.floats(0.02, 0.98), st.integers(1, 30))
def test_two_geo_monotone(p1, p2, j):
    assert two_geo_tail(p1, p2, j + 1) <= two_geo_tail(p1, p2, j) + 1e-15
    assert two_geo_tail(min(p1 + 0.01, 1.0), p2, j) <= two_geo_tail(p1, p2, j) + 1e-15


def test_two_geo_domain():
    with pytest.raises(ValueError):
        two_geo_tail(0.0, 0.5, 3)
    with pytest.raises(ValueError):
        two_geo_tail(0.5, 0.5, 0)


def test_dominance():
    assert averaging_dominance_check(0.4, 0.4, 7)
    assert averaging_dominance_check(0.2, 0.8, 4)
    assert two_geo_tail(0.2, 0.8, 4) > two_geo_tail(0.5, 0.5, 4)
    grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    assert all(averaging_dominance_check(a, b, j) for a in grid for b in grid if a <= b
               for j in range(1, 21))


def test_geo_sum_tail_trivial_cases():
    rep = geo_sum_tail_mc(GeoSumModel((0.3,) * 4), 0, 2000, 1)
    assert rep.empirical_prob == 1.0
    rep = geo_sum_tail_mc(GeoSumModel((1.0,) * 5), 5, 2000, 1)
    assert rep.empirical_prob == 0.0
    with pytest.raises(ValueError):
        geo_sum_tail_mc(GeoSumModel((0.3,)), 1, 10, 1)


def test_geo_sum_tail_bound():
    model = GeoSumModel((0.25,) * 16)
    rep = geo_sum_tail_mc(model, model.lemma_threshold(), 20000, 5)
    assert rep.passes()
    assert json.loads(rep.to_json())["trials"] == 20000


def test_uniform_minimizes_tail_k3():
    # fixed sum of probabilities; the uniform vector gives the smallest tail
    trials, thr = 200000, 12
    uni = geo_sum_tail_mc(GeoSumModel((0.3, 0.3, 0.3)), thr, trials, 2)
    for q in [(0.1, 0.3, 0.5), (0.2, 0.2, 0.5), (0.15, 0.35, 0.4)]:
        rep = geo_sum_tail_mc(GeoSumModel(q), thr, trials, 3)
        assert rep.empirical_prob >= uni.empirical_prob - 3 * math.hypot(rep.sigma_hat,
                                                                         uni.sigma_hat)


def test_model_from_scheme():
    m = GeoSumModel.from_scheme((0.1, 0.2, 0.7), 5)
    assert m.probs == (0.1, 0.2, 0.7, 0.1, 0.2)


def test_certificate_tail_sc_and_one_d():
    inst = make_sc(200.0, 1.0, 8, 1.0, 1e-6)
    rep = certificate_tail_check(inst, SamplingScheme.uniform(8, 0), 5000)
    assert rep.passes() and rep.bound == pytest.approx(1 / 9)
    one = make_one_d(1.0, 1.0, 10)
    rep = certificate_tail_check(one, SamplingScheme.uniform(10, 0), 20000)
    assert rep.threshold == 5 and rep.passes()
    assert rep.empirical_prob == pytest.approx(0.9 ** 5, abs=4 * rep.sigma_hat)


def test_certificate_tail_skew_increases():
    inst = make_sc(200.0, 1.0, 8, 1.0, 1e-6)
    uni = certificate_tail_check(inst, SamplingScheme.uniform(8, 0), 4000)
    p = np.array([0.02] + [0.14] * 7)
    skew = certificate_tail_check(inst, SamplingScheme(tuple(p / p.sum()), 0), 4000)
    assert skew.empirical_prob >= uni.empirical_prob - 3 * max(uni.sigma_hat, 1e-3)


def _law_records(a=0.3, b=0.5):
    out = []
    for n in (4, 16, 64):
        for c in (2, 8, 32):
            ell = math.log(1e6)
            out.append((n, c * n, 1e-6, a * n * ell + b * math.sqrt(n * c * n) * ell))
    return out


def test_fit_exact_law():
    fit = fit_complexity(_law_records())
    assert fit.r2 >= 0.999
    assert fit.a == pytest.approx(0.3) and fit.b == pytest.approx(0.5)
    assert json.loads(fit.to_json())["records"] == 9
    assert isinstance(fit, FitSummary)


def test_fit_degenerate():
    with pytest.raises(ValueError):
        fit_complexity(_law_records()[:1])
    same_kappa = [(n, 10.0, 1e-6, 100.0 * n) for n in (2, 3, 4, 5, 6, 7)]
    with pytest.raises(ValueError):
        fit_complexity(same_kappa)
