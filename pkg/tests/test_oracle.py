import itertools
import json
import random

import pytest

from cpn_sem.model import ContractError, cost
from cpn_sem.oracle import (bisection_gadget, brute_force_p2a, brute_force_pwkgpp, check_gadget,
                            min_bisection, random_gadget_graph, random_tiny_instance,
                            simple_paths, sweep, verify_proposition1, verify_theorem2)
from cpn_sem.partition import check_balance

from conftest import make_entity, make_topology


def test_single_cn_fits():
    topo = make_topology([20, 20], [(0, 1, 5)])
    e = make_entity([3, 4], [(0, 1, 2)])
    rep = brute_force_p2a(topo, e)
    assert rep.optimum_cost == 0 and cost(e, rep.optimal_decision) == 7


def test_infeasible_total_demand():
    topo = make_topology([3, 3], [(0, 1, 5)])
    rep = brute_force_p2a(topo, make_entity([4, 4], [(0, 1, 1)]))
    assert not rep.feasible and rep.optimal_decision is None


def test_bounds_refused():
    topo = make_topology([9] * 5, [(i, i + 1, 1) for i in range(4)])
    with pytest.raises(ContractError):
        brute_force_p2a(topo, make_entity([1, 1], [(0, 1, 1)]))


def test_simple_paths_k4():
    topo = make_topology([1] * 4, list((a, b, 1) for a, b in itertools.combinations(range(4), 2)))
    ps = simple_paths(topo, 0, 3)
    assert len(ps) == 5 and ps[0] == (0, 3)


def test_min_bisection_small():
    assert min_bisection(4, [(0, 1), (1, 2), (2, 3)]) == 1
    assert min_bisection(4, list(itertools.combinations(range(4), 2))) == 4
    assert min_bisection(3, [(0, 1), (1, 2), (0, 2)]) == 2


def test_gadget_path_of_four():
    topo, e = bisection_gadget(4, [(0, 1), (1, 2), (2, 3)])
    rep = brute_force_p2a(topo, e)
    assert rep.optimum_cost == 2
    assert set(rep.optimal_decision.assignment.values()) <= {0, 1}


@pytest.mark.parametrize("seed", range(10))
def test_gadget_random(seed):
    assert check_gadget(*random_gadget_graph(random.Random(seed))).passed


@pytest.mark.parametrize("seed", range(10))
def test_theorem2_random(seed):
    topo, e = random_tiny_instance(random.Random(seed))
    assert verify_theorem2(e, topo).passed


def test_theorem2_single_cn():
    topo = make_topology([50], [])
    r = verify_theorem2(make_entity([1, 2, 3], [(0, 1, 1), (1, 2, 1)]), topo)
    assert r.passed and r.detail["p3"] == 0


def test_theorem2_detects_broken_balance_check():
    def broken(entity, asg, pwv, theta):
        # seeded defect: demands the first CN be strictly over its share
        return check_balance(entity, asg, pwv, theta) and len(pwv) < 2

    topo = make_topology([4, 4], [(0, 1, 10)])
    e = make_entity([3, 3], [(0, 1, 1)])
    assert verify_theorem2(e, topo).passed
    assert not verify_theorem2(e, topo, balance_check=broken).passed


@pytest.mark.parametrize("seed", range(10))
def test_proposition1_random(seed):
    topo, e = random_tiny_instance(random.Random(100 + seed))
    assert verify_proposition1(e, topo).passed


def test_proposition1_zero_cut():
    topo = make_topology([50, 50], [(0, 1, 1)])
    r = verify_proposition1(make_entity([1, 2], [(0, 1, 9)]), topo)
    assert r.passed and r.detail["oracle"] == 0


def test_pwkgpp_report_gap():
    e = make_entity([3, 3, 3, 3], [(0, 1, 1), (1, 2, 1), (2, 3, 1)])
    rep = brute_force_pwkgpp(e, {0: 0.5, 1: 0.5}, 0.0, {0: 9, 1: 9})
    assert rep.optimum_cost == 1 and rep.comparison["heuristic"]["gap"] == 0


def test_sweep_deterministic_and_json():
    a, b = sweep(3, 5), sweep(3, 5)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    for k in ("proposition1", "theorem2", "gadget"):
        assert a[k]["passed"] == a[k]["n"] == 3
