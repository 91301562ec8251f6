"""Acceptance suite: one PASS/FAIL line per criterion, repeated in the terminal summary.

The desk-scale criteria (1, 6) take tens of minutes on one core. Set
SEM_DESK_DIR to a directory to reuse finished runs between invocations.
"""
import json
import math
import os
import random
import statistics
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from cpn_sem.cli import execute, main as sem_main, replay
from cpn_sem.config import RunConfig
from cpn_sem.fragmentation import FragConfig, cbug, nred, pnvl
from cpn_sem.model import (MappingDecision, ProfitParams, generate_random_cpn,
                           generate_service_entity, profit_from_totals)
from cpn_sem.oracle import (check_gadget, random_gadget_graph, random_partition_instance,
                            random_tiny_instance, verify_proposition1, verify_theorem2)
from cpn_sem.partition import check_balance, cut_weight, partition_exact, partition_heuristic_detailed
from cpn_sem.routing import PathTable
from cpn_sem.search import AbsSolver, SearchParams

from conftest import ACCEPTANCE_LINES, make_entity, make_topology

pytestmark = pytest.mark.acceptance


def report(n, passed, detail):
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[str(n)] = line
    print(line)
    return passed


@pytest.fixture(scope="module")
def desk_dir(tmp_path_factory):
    env = os.environ.get("SEM_DESK_DIR")
    return Path(env) if env else tmp_path_factory.mktemp("desk")


def desk_config(solver, seed, deterministic=True):
    return RunConfig(seed=seed, solver=solver,
                     search=SearchParams(n_workers=4, seed=seed, deterministic_mode=deterministic))


def desk_run(root, solver, seed, deterministic=True):
    tag = "det" if deterministic else "thr"
    out = root / f"{solver}-{seed}-{tag}"
    if not (out / "summary.json").exists():
        t0 = time.perf_counter()
        execute(desk_config(solver, seed, deterministic), out)
        (out / "elapsed.txt").write_text(f"{time.perf_counter() - t0:.3f}\n")
    return out


@pytest.mark.slow
def test_c1_soundness_gate(desk_dir):
    out = desk_run(desk_dir, "abs", 0, deterministic=False)
    summary = json.loads((out / "summary.json").read_text())["metrics"]
    problems = replay(out)
    elapsed = float((out / "elapsed.txt").read_text())
    ok = (not problems and summary["invalid_decisions"] == 0 and summary["conservation_ok"]
          and summary["arrived"] == 300 and elapsed < 600)
    report(1, ok, f"accepted={summary['accepted']}/300 problems={len(problems)} "
                  f"elapsed={elapsed:.0f}s")
    assert ok, problems[:5]


def test_c2_proposition1():
    rng = random.Random(2024)
    fails = []
    for i in range(50):
        topo, e = random_tiny_instance(rng)
        r = verify_proposition1(e, topo)
        if not r.passed:
            fails.append(r.detail)
    report(2, not fails, f"{50 - len(fails)}/50 exact")
    assert not fails, fails[:3]


def test_c3_theorem2():
    rng = random.Random(77)
    fails = []
    for _ in range(100):
        topo, e = random_tiny_instance(rng)
        r = verify_theorem2(e, topo)
        if not r.passed:
            fails.append(r.detail)
    report(3, not fails, f"{100 - len(fails)}/100 exact")
    assert not fails, fails[:3]


def test_c4_gadget():
    rng = random.Random(5)
    fails = [r.detail for r in (check_gadget(*random_gadget_graph(rng)) for _ in range(20))
             if not r.passed]
    report(4, not fails, f"{20 - len(fails)}/20 with optimum == 2 x bisection")
    assert not fails, fails[:3]


def test_c5_partitioner_quality():
    rng = random.Random(11)
    unsound, within, n = [], 0, 100
    for i in range(n):
        e, pwv, caps = random_partition_instance(rng, max_sfs=10)
        asg, tol = partition_heuristic_detailed(e, pwv, 0.05, caps, seed=i)
        if asg is None or not check_balance(e, asg, pwv, tol):
            unsound.append(i)
            continue
        loads = {}
        for sf, m in asg.items():
            loads[m] = loads.get(m, 0) + e.demand[sf]
        if any(loads[m] > caps.get(m, 0) for m in loads):
            unsound.append(i)
            continue
        exact = partition_exact(e, pwv, tol, caps)
        h, x = cut_weight(e, asg), cut_weight(e, exact)
        within += h <= 2 * x
    ok = not unsound and within >= 90
    report(5, ok, f"sound={n - len(unsound)}/{n} within2x={within}/{n}")
    assert ok


def test_c6_comparative_dominance(desk_dir):
    seeds = range(5)
    rows = {s: [] for s in ("abs", "rwbfs")}
    nreds = {s: [] for s in rows}
    for solver in rows:
        for seed in seeds:
            out = desk_run(desk_dir, solver, seed)
            rows[solver].append(json.loads((out / "summary.json").read_text())["metrics"])
            nreds[solver] += [json.loads(l)["nred"]
                              for l in (out / "decisions.jsonl").read_text().splitlines()]
    med = {s: (statistics.median(m["acceptance_ratio"] for m in rows[s]),
               statistics.median(m["cu_ratio"] for m in rows[s])) for s in rows}
    (a_ar, a_cu), (b_ar, b_cu) = med["abs"], med["rwbfs"]
    rel = max(a_ar / b_ar - 1, a_cu / b_cu - 1)
    p = float(mannwhitneyu(nreds["abs"], nreds["rwbfs"], alternative="greater").pvalue)
    ok = a_ar > b_ar and a_cu > b_cu and rel >= 0.05 and p < 0.05
    report(6, ok, f"AR {a_ar:.3f} vs {b_ar:.3f}, CU {a_cu:.3f} vs {b_cu:.3f}, "
                  f"best rel gain {rel:.1%}, NRED rank-test p={p:.2e}")
    assert ok


@pytest.mark.parametrize("mode", ["as-written", "corrected"])
def test_c7_metric_examples(mode):
    cfg = FragConfig(pnvl_exponent_sign=mode)
    topo = make_topology([10, 10], [(0, 1, 10)])
    checks = [
        (nred(make_entity([10], []), MappingDecision(0, {0: 0}, {}), topo), 1e6),
        (cbug(make_entity([10, 20], [(0, 1, 5)]),
              MappingDecision(0, {0: 0, 1: 1}, {(0, 1): (0, 1)})),
         (10 / (5 + 1e-6) + 20 / (5 + 1e-6)) / 2),
        (pnvl(make_entity([3], []), MappingDecision(0, {0: 0}, {}), make_topology([10], []), cfg),
         cfg.eps_prime / cfg.eps),
        (profit_from_totals(5, 10, 100, 60, ProfitParams(2.0, 0.5)), 17.5),
    ]
    bad = [(got, want) for got, want in checks if abs(got - want) > 1e-9 * abs(want)]
    report(f"7[{mode}]", not bad, f"{len(checks) - len(bad)}/{len(checks)} examples at 1e-9")
    assert not bad


def test_c8_determinism(tmp_path):
    cfg = {"seed": 8, "topology": {"n_nodes": 12, "n_links": 20},
           "workload": {"n_requests": 15, "size_range": [4, 8]},
           "search": {"swarm_size": 8, "max_iters": 6, "elite_size": 2}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    for d in ("a", "b"):
        assert sem_main(["run", "--config", str(path), "--deterministic",
                         "--out", str(tmp_path / d)]) == 0
    same = (tmp_path / "a" / "summary.json").read_bytes() == \
        (tmp_path / "b" / "summary.json").read_bytes()
    report(8, same, "summary.json byte-identical" if same else "summary.json differs")
    assert same


def test_c9_scaling():
    topo = generate_random_cpn(30, 60, (100, 150), (100, 150), seed=9)
    table = PathTable(topo, 5)
    entities = [generate_service_entity((5, 15), 0.5, (1, 20), seed=100 + i, bw_range=(1, 20))
                for i in range(16)]
    iters, medians = [10, 20, 40], []
    for it in iters:
        solver = AbsSolver(table, SearchParams(max_iters=it, seed=1, deterministic_mode=True))
        times = []
        for e in entities:
            # deterministic mode is single-threaded, so CPU time is the work done;
            # best of two damps scheduler noise on a shared core
            best = math.inf
            for _ in range(2):
                t0 = time.process_time()
                solver.solve(e, topo)
                best = min(best, time.process_time() - t0)
            times.append(best)
        medians.append(statistics.median(times))
    x, y = np.log(iters), np.log(medians)
    slope, icpt = np.polyfit(x, y, 1)
    r2 = 1 - np.sum((y - (slope * x + icpt)) ** 2) / np.sum((y - y.mean()) ** 2)
    ok = slope <= 1.15 and r2 >= 0.9
    report(9, ok, f"slope={slope:.3f} R2={r2:.3f} medians={[round(m, 3) for m in medians]}")
    assert ok
