import numpy as np
import pytest
from scipy.optimize import minimize

from hardsum.errors import ProxValidityError
from hardsum.instances import make_one_d, minimizer
from hardsum.oracle import (Oracle, component_gradient, component_prox, component_value,
                            full_gradient, full_value, nc_gamma_limit, pifo_call, prox_blocks)
from hardsum.verify import block_root_count, dense_objective
from hardsum.structure import dense_band, subspace_index


def _gamma(inst, rng):
    if inst.family == "NC":
        return nc_gamma_limit(inst) * rng.uniform(0.01, 0.99)
    return float(10 ** rng.uniform(-3, 2)) / inst.L


def _point(inst, rng):
    scale = inst.nc_beta if inst.family == "NC" else 1.0
    return scale * rng.uniform(-2, 3, inst.dim)


def test_zero_value_away_from_component_one(convex_inst):
    inst = convex_inst
    for i in range(2, inst.n + 1):
        assert component_value(inst, i, np.zeros(inst.dim)) == 0.0


def test_component_one_gradient_at_origin(inst):
    g = component_gradient(inst, 1, np.zeros(inst.dim))
    expect = np.zeros(inst.dim)
    expect[inst.anchor] = -inst.lambda0
    np.testing.assert_array_equal(g, expect)
    assert subspace_index(g, inst.orientation) == 1


def test_average_of_components_is_full(inst):
    x = _point(inst, np.random.default_rng(1))
    vals = [component_value(inst, i, x) for i in range(1, inst.n + 1)]
    grads = [component_gradient(inst, i, x) for i in range(1, inst.n + 1)]
    assert np.mean(vals) == pytest.approx(full_value(inst, x), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(np.mean(grads, axis=0), full_gradient(inst, x), atol=1e-12)


def test_gradient_finite_differences(inst):
    rng = np.random.default_rng(2)
    x = _point(inst, rng)
    h = 1e-6 * (inst.nc_beta if inst.family == "NC" else 1.0)
    for i in range(1, inst.n + 1):
        g = component_gradient(inst, i, x)
        fd = np.array([(component_value(inst, i, x + h * e) - component_value(inst, i, x - h * e))
                       / (2 * h) for e in np.eye(inst.dim)])
        np.testing.assert_allclose(fd, g, rtol=1e-6, atol=1e-6 * (1 + np.abs(g).max()))


def test_prox_stationarity(inst):
    rng = np.random.default_rng(3)
    for _ in range(40):
        x = _point(inst, rng)
        gamma = _gamma(inst, rng)
        i = int(rng.integers(1, inst.n + 1))
        p = component_prox(inst, i, x, gamma)
        res = np.linalg.norm(component_gradient(inst, i, p) + (p - x) / gamma)
        assert res <= 1e-10 * (1 + np.linalg.norm(x) / gamma)


def _dense_prox(inst, i, x, gamma):
    # minimize f_i(u) + |x - u|^2/(2 gamma) through its normal equations
    d = inst.dim
    H = 2 * inst.lambda2 * np.eye(d)
    if inst.family != "ONE_D":
        B = dense_band(inst.spec)
        Bi = B[[l - 1 for l in inst.partition.rows(i)]]
        H = H + 2 * inst.lambda1 * Bi.T @ Bi
    rhs = x / gamma
    if i == 1:
        rhs[inst.anchor] += inst.lambda0
    return np.linalg.solve(H + np.eye(d) / gamma, rhs)


def test_prox_matches_dense(convex_inst):
    inst = convex_inst
    rng = np.random.default_rng(4)
    for _ in range(40):
        x = _point(inst, rng)
        gamma = _gamma(inst, rng)
        i = int(rng.integers(1, inst.n + 1))
        ref = _dense_prox(inst, i, x, gamma)
        np.testing.assert_allclose(component_prox(inst, i, x, gamma), ref, rtol=1e-10,
                                   atol=1e-10 * (1 + np.abs(ref).max()))


def test_one_d_prox_closed_form():
    inst = make_one_d(2.0, 1.5, 5)
    for gamma in (0.1, 1.0, 7.0):
        assert component_prox(inst, 3, np.zeros(1), gamma)[0] == 0.0
        ref = 5 * 2.0 * 1.5 * gamma / (1 + 2.0 * gamma)
        assert component_prox(inst, 1, np.zeros(1), gamma)[0] == pytest.approx(ref, rel=1e-14)


def test_prox_nonexpansive(convex_inst):
    inst = convex_inst
    rng = np.random.default_rng(5)
    for _ in range(1000):
        x, y = rng.standard_normal((2, inst.dim)) * rng.uniform(0.1, 10)
        gamma = _gamma(inst, rng)
        i = int(rng.integers(1, inst.n + 1))
        d = component_prox(inst, i, x, gamma) - component_prox(inst, i, y, gamma)
        assert np.linalg.norm(d) <= np.linalg.norm(x - y) * (1 + 1e-12)


def test_prox_small_gamma_limit(inst):
    rng = np.random.default_rng(6)
    x = _point(inst, rng)
    top = nc_gamma_limit(inst) * 0.9 if inst.family == "NC" else 1.0 / inst.L
    dists = [np.linalg.norm(component_prox(inst, 1, x, top * 10.0 ** -k) - x) for k in range(8)]
    assert all(a > b for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 1e-5 * (1 + np.linalg.norm(x))


def test_nc_gamma_validity(instances):
    inst = instances["NC"]
    lim = nc_gamma_limit(inst)
    x = np.zeros(inst.dim)
    for g in (lim, lim * (1 - 1e-14), 2 * lim):
        with pytest.raises(ProxValidityError):
            component_prox(inst, 1, x, g)
    component_prox(inst, 1, x, lim * (1 - 1e-9))
    with pytest.raises(ProxValidityError):
        component_prox(inst, 1, x, -1.0)


def test_nc_prox_is_global_minimizer(instances):
    inst = instances["NC"]
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = _point(inst, rng)
        gamma = nc_gamma_limit(inst) * 0.8
        i = int(rng.integers(1, inst.n + 1))
        obj = lambda u: component_value(inst, i, u) + np.sum((u - x) ** 2) / (2 * gamma)
        p = component_prox(inst, i, x, gamma)
        for start in (x, np.zeros(inst.dim), x + inst.nc_beta * rng.standard_normal(inst.dim)):
            res = minimize(obj, start, method="BFGS", options={"gtol": 1e-10})
            assert obj(p) <= res.fun + 1e-9 * (1 + abs(res.fun))


def test_nc_blocks_have_unique_roots(instances):
    inst = instances["NC"]
    rng = np.random.default_rng(8)
    for _ in range(5):
        x = _point(inst, rng)
        gamma = nc_gamma_limit(inst) * rng.uniform(0.1, 0.99)
        i = int(rng.integers(1, inst.n + 1))
        blocks = prox_blocks(inst, i, x, gamma)
        covered = sorted(c for b in blocks for c in b.coords)
        assert covered == list(range(inst.dim))
        for b in blocks:
            assert block_root_count(b) == 1


def test_pifo_call_bundle(inst):
    x = np.zeros(inst.dim)
    gamma = nc_gamma_limit(inst) / 2 if inst.family == "NC" else 1.0
    r = pifo_call(inst, 1, x, gamma)
    assert r.value == component_value(inst, 1, x)
    assert r.gamma == gamma
    assert r.prox_point.shape == (inst.dim,)
    assert pifo_call(inst, 2, x).prox_point is None


def test_oracle_counts_and_does_not_mutate(inst):
    orc = Oracle(inst)
    x = np.ones(inst.dim)
    keep = x.copy()
    for t in range(5):
        orc(1 + t % inst.n, x)
    assert orc.calls == 5
    np.testing.assert_array_equal(x, keep)


def test_dimension_and_index_errors(inst):
    with pytest.raises(ValueError):
        component_value(inst, 1, np.zeros(inst.dim + 1))
    with pytest.raises(IndexError):
        component_gradient(inst, inst.n + 1, np.zeros(inst.dim))
    with pytest.raises(ValueError):
        full_value(inst, np.zeros(inst.dim + 2))


def test_full_gradient_vanishes_at_minimizer(convex_inst):
    x, f = minimizer(convex_inst)
    assert full_value(convex_inst, x) == pytest.approx(f, rel=1e-9)
    H, b = dense_objective(convex_inst)
    assert np.linalg.norm(full_gradient(convex_inst, x)) <= 1e-9 * np.linalg.norm(b)
