import csv

import numpy as np
import pytest

from hardsum.instances import certificate, make_one_d, make_sc
from hardsum.solvers import (ALGORITHMS, AlgorithmSpec, SamplingScheme, greedy_span_probe,
                             point_saga_gamma, queries_to_eps, run, sample_index, sample_indices)
from hardsum.analysis import stopping_times


def test_scheme_validation():
    with pytest.raises(ValueError):
        SamplingScheme((0.6, 0.4))
    with pytest.raises(ValueError):
        SamplingScheme((0.5, 0.6))
    with pytest.raises(ValueError):
        SamplingScheme((0.0, 1.0))
    with pytest.raises(ValueError):
        SamplingScheme((1.0,))


def test_sampling_deterministic_and_windowed():
    s = SamplingScheme.uniform(5, seed=123)
    full = sample_indices(s, 1, 1000)
    np.testing.assert_array_equal(sample_indices(s, 1, 1000), full)
    np.testing.assert_array_equal(sample_indices(s, 338, 17), full[337:354])
    assert sample_index(s, 10) == full[9]
    assert set(np.unique(sample_indices(SamplingScheme((0.5, 0.5), 1), 1, 50))) == {1, 2}


def test_sampling_frequencies():
    n = 7
    idx = sample_indices(SamplingScheme.uniform(n, 9), 1, 10 ** 6)
    counts = np.bincount(idx, minlength=n + 1)[1:]
    sigma = np.sqrt(10 ** 6 * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - 10 ** 6 / n) <= 4 * sigma)


def test_sampling_skewed_frequencies():
    p = (0.1, 0.2, 0.3, 0.4)
    idx = sample_indices(SamplingScheme(p, 4), 1, 400000)
    freq = np.bincount(idx, minlength=5)[1:] / 400000
    sigma = np.sqrt(np.array(p) * (1 - np.array(p)) / 400000)
    assert np.all(np.abs(freq - p) <= 4 * sigma)


@pytest.mark.parametrize("name", ALGORITHMS)
def test_trace_accounting_and_span(name, instances):
    inst = instances["SC"]
    tr = run(inst, AlgorithmSpec(name, debug_span=True), SamplingScheme.uniform(inst.n, 2), 60)
    assert len(tr.t) == 61 and tr.queries[-1] == 60
    assert tr.k[0] == 0 and tr.value[0] == pytest.approx(inst.Delta)
    assert np.all(tr.i_t[1:] >= 1)


@pytest.mark.parametrize("name", ALGORITHMS)
def test_replay_is_bitwise(name, instances):
    inst = instances["C"]
    s = SamplingScheme.uniform(inst.n, 5)
    a = run(inst, AlgorithmSpec(name), s, 40)
    b = run(inst, AlgorithmSpec(name), s, 40)
    np.testing.assert_array_equal(a.value, b.value)
    np.testing.assert_array_equal(a.x_final, b.x_final)


def test_nc_runs(instances):
    inst = instances["NC"]
    tr = run(inst, AlgorithmSpec("prox_point", debug_span=True), SamplingScheme.uniform(inst.n, 1),
             30)
    assert tr.metric == "grad_norm" and len(tr.t) == 31


def test_prox_point_one_d_waits_for_component_one():
    inst = make_one_d(1.0, 1.0, 6)
    tr = run(inst, AlgorithmSpec("prox_point"), SamplingScheme.uniform(6, 11), 40)
    first = int(np.argmax(tr.indices == 1)) + 1
    assert first > 1
    assert np.all(tr.k[:first] == 0)
    assert tr.k[first] == 1


def test_point_saga_converges():
    inst = make_sc(400.0, 1.0, 8, 1.0, 1e-7)
    tr = run(inst, AlgorithmSpec("point_saga"), SamplingScheme.uniform(8, 0), 5000,
             stop_at=1e-6)
    q = queries_to_eps(tr, 1e-6)
    assert q is not None and q > certificate(inst).N
    assert tr.queries[-1] == q


def test_point_saga_gamma():
    assert point_saga_gamma(4, 1.0, 0.0) == 1.0
    g = point_saga_gamma(1, 2.0, 0.5)
    # n = 1 gives the proximal-point step sqrt(4L/mu)/(2L)
    assert g == pytest.approx(np.sqrt(16.0) / 4.0)


def test_queries_to_eps_censored(instances):
    inst = instances["SC"]
    tr = run(inst, AlgorithmSpec("sgd"), SamplingScheme.uniform(inst.n, 0), 10)
    assert queries_to_eps(tr, 1e-30) is None


def test_trace_csv(tmp_path, instances):
    inst = instances["SC"]
    tr = run(inst, AlgorithmSpec("saga"), SamplingScheme.uniform(inst.n, 0), 12)
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "i_t", "gamma_t", "queries", "subopt", "k"]
    assert len(rows) == 14


def test_budget_must_be_positive(instances):
    with pytest.raises(ValueError):
        run(instances["SC"], AlgorithmSpec("sgd"), SamplingScheme.uniform(5), 0)


def test_oracle_errors_carry_step(instances):
    inst = instances["NC"]
    algo = AlgorithmSpec("prox_point", gamma=1e9)
    with pytest.raises(ValueError, match="query 1"):
        run(inst, algo, SamplingScheme.uniform(inst.n), 5)


def test_greedy_probe_respects_stopping_times(instances):
    inst = instances["SC"]
    s = SamplingScheme.uniform(inst.n, 3)
    tr = greedy_span_probe(inst, s, 80)
    T = stopping_times(tr, inst.n, inst.m)
    for t in range(1, len(tr.t)):
        reached = sum(1 for v in T if v is not None and v <= t)
        assert tr.k[t] <= reached
        assert tr.k[t] - tr.k[t - 1] <= 1


def test_greedy_probe_empty_budget(instances):
    tr = greedy_span_probe(instances["SC"], SamplingScheme.uniform(5), 0)
    assert len(tr.t) == 1 and tr.k[0] == 0


def test_prox_point_expected_progress(instances):
    inst = instances["C"]
    vals = np.array([run(inst, AlgorithmSpec("prox_point"), SamplingScheme.uniform(inst.n, s),
                         100).value for s in range(100)])
    windows = vals[:, 1:].reshape(100, 10, 10).mean(axis=2)
    mean = windows.mean(axis=0)
    se = windows.std(axis=0, ddof=1) / np.sqrt(100)
    for a in range(9):
        assert mean[a + 1] <= mean[a] + 2 * np.hypot(se[a], se[a + 1])
