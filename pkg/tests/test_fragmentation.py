import math

import pytest
from hypothesis import given, strategies as st

from cpn_sem.fragmentation import (FragConfig, cbug, combine, evaluate, fitness, node_usage, nred,
                                   pnvl)
from cpn_sem.model import ContractError, MappingDecision

from conftest import make_entity, make_topology

MODES = ["as-written", "corrected"]


def cfg(mode="as-written", **kw):
    return FragConfig(pnvl_exponent_sign=mode, **kw)


def test_node_usage_examples():
    e = make_entity([3, 2], [(0, 1, 4)])
    assert node_usage(e, MappingDecision(0, {0: 0, 1: 0}, {})) == ({0: 5}, {0: 0})
    assert node_usage(e, MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})) == \
        ({0: 3, 1: 2}, {0: 4, 1: 4})
    e3 = make_entity([1, 1, 1], [(0, 1, 5), (1, 2, 1)])
    _, bw = node_usage(e3, MappingDecision(0, {0: 0, 1: 0, 2: 1}, {(1, 2): (0, 1)}))
    assert bw[0] == 1


def test_nred_examples():
    topo = make_topology([10, 10], [(0, 1, 10)])
    full = make_entity([10], [])
    assert nred(full, MappingDecision(0, {0: 0}, {}), topo) == pytest.approx(1e6, rel=1e-9)
    half = make_entity([5, 5], [(0, 1, 1)])
    d = MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    assert nred(half, d, topo) == pytest.approx(1.0 / (2 + 1e-6), rel=1e-9)
    topo100 = make_topology([100, 100], [(0, 1, 10)])
    near = make_entity([96], [])
    assert nred(near, MappingDecision(0, {0: 0}, {}), topo100) == pytest.approx(0.96 / 1e-6, rel=1e-9)


def test_nred_increases_when_node_exhausts():
    topo = make_topology([10, 10], [(0, 1, 10)])
    e1 = make_entity([5, 5], [(0, 1, 1)])
    e2 = make_entity([10, 5], [(0, 1, 1)])
    d = MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    assert nred(e2, d, topo) > nred(e1, d, topo)


def test_cbug_examples():
    assert cbug(make_entity([10], []), MappingDecision(0, {0: 0}, {})) == pytest.approx(1e7, rel=1e-9)
    e = make_entity([10, 1], [(0, 1, 5)])
    d = MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    p_c, p_bw = node_usage(e, d)
    assert p_c[0] / (p_bw[0] + 1e-6) == pytest.approx(2.0, rel=1e-6)
    # gaps 2.0 and 4.0 -> mean 3.0
    e2 = make_entity([10, 20], [(0, 1, 5)])
    assert cbug(e2, d) == pytest.approx((10 / (5 + 1e-6) + 20 / (5 + 1e-6)) / 2, rel=1e-12)
    assert cbug(e2, d) == pytest.approx(3.0, rel=1e-6)


def test_cbug_decreases_with_bandwidth():
    d = MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    assert cbug(make_entity([5, 5], [(0, 1, 3)]), d) < cbug(make_entity([5, 5], [(0, 1, 2)]), d)


@pytest.mark.parametrize("mode", MODES)
def test_pnvl_empty_cut(mode):
    topo = make_topology([10], [])
    value = pnvl(make_entity([3], []), MappingDecision(0, {0: 0}, {}), topo, cfg(mode))
    assert value == pytest.approx(1e-3 / 1e-6, rel=1e-9)


@pytest.mark.parametrize("mode", MODES)
def test_pnvl_direct_path(mode):
    topo = make_topology([10, 10], [(0, 1, 10)])
    e = make_entity([1, 1], [(0, 1, 2)])
    d = MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    assert pnvl(e, d, topo, cfg(mode)) == pytest.approx(1e-3 / (1 + 1e-6), rel=1e-9)


@pytest.mark.parametrize("mode,sign", [("as-written", 1), ("corrected", -1)])
def test_pnvl_one_forwarding_node(mode, sign):
    topo = make_topology([10, 4, 10], [(0, 1, 10), (1, 2, 10)])
    e = make_entity([1, 1], [(0, 1, 2)])
    d = MappingDecision(0, {0: 0, 1: 2}, {(0, 1): (0, 1, 2)})
    p_pv = 2 / 4.000001 * math.exp(sign)
    assert pnvl(e, d, topo, cfg(mode)) == pytest.approx((p_pv + 1e-3) / (1 + 1e-6), rel=1e-9)
    if mode == "as-written":
        assert p_pv == pytest.approx(1.359, abs=1e-3)


def test_fitness_examples():
    c = FragConfig(weights=(1.0, 0.0, 0.0))
    assert combine(2.0, 5.0, 7.0, c) == 0.5
    topo = make_topology([10, 10], [(0, 1, 10)])
    e = make_entity([5, 5], [(0, 1, 1)])
    together = MappingDecision(0, {0: 0, 1: 0}, {})
    split = MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    assert fitness(e, together, topo) < fitness(e, split, topo)
    assert fitness(e, together, topo) == pytest.approx(1 / (0.6 * 1e6 + 0.3 * 1e7 + 0.1 * 1e3),
                                                       rel=1e-6)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.1, 10))
def test_combine_scaling(n, c, p, k):
    assert combine(k * n, k * c, k * p) == pytest.approx(combine(n, c, p) / k, rel=1e-9)


@given(st.tuples(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1)),
       st.floats(0.1, 10))
def test_fitness_order_weight_scale_invariant(raw, k):
    # rescaling all weights uniformly preserves the ordering of two decisions
    w = tuple(x / sum(raw) for x in raw)
    topo = make_topology([10, 10], [(0, 1, 10)])
    e = make_entity([5, 3], [(0, 1, 1)])
    d1, d2 = MappingDecision(0, {0: 0, 1: 0}, {}), MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})
    s1, s2 = evaluate(e, d1, topo, FragConfig(weights=w)), evaluate(e, d2, topo, FragConfig(weights=w))
    def f(s):
        return 1 / (k * (w[0] * s.nred + w[1] * s.cbug + w[2] * s.pnvl))
    assert (s1.fitness < s2.fitness) == (f(s1) < f(s2))


def test_evaluate_bit_identical():
    topo = make_topology([10, 7, 10], [(0, 1, 10), (1, 2, 10)])
    e = make_entity([4, 3], [(0, 1, 2)])
    d = MappingDecision(0, {0: 0, 1: 2}, {(0, 1): (0, 1, 2)})
    assert evaluate(e, d, topo) == evaluate(e, d, topo)


@pytest.mark.parametrize("kw", [dict(delta=1.0), dict(eps=1e-2, eps_prime=1e-3),
                                dict(weights=(0.5, 0.5, 0.5)), dict(pnvl_exponent_sign="x")])
def test_config_invalid(kw):
    with pytest.raises(ContractError):
        FragConfig(**kw)
