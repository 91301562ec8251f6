"""Brute-force references for tiny instances.

Everything here enumerates; nothing calls the heuristics except to compare
against them. Simple paths are enumerated with a local DFS so the routing
module is not its own referee.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .model import (ContractError, CpnLink, CpnNode, CpnTopology, LogicalLink, MappingDecision,
                    ServiceEntity, ServiceFunction, generate_service_entity, link_key, path_links,
                    validate_decision)
from .partition import (check_balance, cut_weight, partition_exact, partition_heuristic_detailed,
                        pwv_from_assignment)
from .routing import PathTable, flow_cost
from .search import exhaustive_nested_solve

MAX_SFS = 6
MAX_NODES = 4
MAX_PWKGPP_SFS = 12


@dataclass
class OracleReport:
    instance: dict
    optimum_cost: Optional[int]  # None: infeasible
    optimal_decision: Optional[MappingDecision] = None
    comparison: Dict[str, dict] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.optimum_cost is not None

    def compare(self, name: str, cost: Optional[int]) -> None:
        gap = None
        if cost is not None and self.optimum_cost is not None:
            gap = cost - self.optimum_cost
        self.comparison[name] = {"cost": cost, "feasible": cost is not None, "gap": gap}

    def to_json(self) -> dict:
        return {"instance": self.instance, "optimum_cost": self.optimum_cost,
                "optimal_decision": self.optimal_decision.to_json() if self.optimal_decision else None,
                "comparison": self.comparison}


def simple_paths(topology: CpnTopology, src: int, dst: int) -> List[Tuple[int, ...]]:
    """All loop-free paths, ordered by (hops, node sequence)."""
    out = []

    def dfs(path: List[int], seen: set) -> None:
        u = path[-1]
        if u == dst:
            out.append(tuple(path))
            return
        for v in topology.adjacency[u]:
            if v not in seen:
                seen.add(v)
                path.append(v)
                dfs(path, seen)
                path.pop()
                seen.discard(v)

    dfs([src], {src})
    return sorted(out, key=lambda p: (len(p), p))


def _describe(topology: CpnTopology, entity: ServiceEntity) -> dict:
    return {"nodes": [[n.id, n.cpu_available] for n in topology.nodes],
            "links": [[l.u, l.v, l.bw_available] for l in topology.links.values()],
            "entity": entity.to_json()}


def brute_force_p2a(topology: CpnTopology, entity: ServiceEntity,
                    k_paths: Optional[int] = None) -> OracleReport:
    """Minimum LLnM cost over every assignment and every per-Cut-LL path choice.

    `k_paths=None` uses all simple paths. The reported cost is the bandwidth
    cost of routing (node cost is the same for every feasible decision).
    """
    sfs = sorted(sf.id for sf in entity.sfs)
    nodes = topology.node_ids
    if len(sfs) > MAX_SFS or len(nodes) > MAX_NODES:
        raise ContractError(f"brute force limited to {MAX_SFS} SFs and {MAX_NODES} CNs")
    paths: Dict[Tuple[int, int], List[Tuple[int, ...]]] = {}
    for a in nodes:
        for b in nodes:
            if a != b:
                ps = simple_paths(topology, a, b)
                paths[(a, b)] = ps if k_paths is None else ps[:k_paths]
    avail_bw = {k: l.bw_available for k, l in topology.links.items()}
    best: List[Optional[Tuple[int, MappingDecision]]] = [None]

    for combo in itertools.product(nodes, repeat=len(sfs)):
        asg = dict(zip(sfs, combo))
        load = [0] * len(nodes)
        for s, m in asg.items():
            load[m] += entity.demand[s]
        if any(load[m] > topology.nodes[m].cpu_available for m in nodes):
            continue
        cut = [ll for ll in sorted(entity.lls, key=lambda l: l.key) if asg[ll.u] != asg[ll.v]]
        choices = [paths[(asg[ll.u], asg[ll.v])] for ll in cut]
        residual = dict(avail_bw)
        picked: List[Tuple[int, ...]] = []

        def rec(i: int, c: int) -> None:
            # strict improvement only, so the first optimum in enumeration order is kept
            if best[0] is not None and c >= best[0][0]:
                return
            if i == len(cut):
                flows = {ll.key: p for ll, p in zip(cut, picked)}
                best[0] = (c, MappingDecision(entity.id, dict(asg), flows))
                return
            bw = cut[i].bw_demand
            for p in choices[i]:
                links = path_links(p)
                if all(residual[k] >= bw for k in links):
                    for k in links:
                        residual[k] -= bw
                    picked.append(p)
                    rec(i + 1, c + bw * (len(p) - 1))
                    picked.pop()
                    for k in links:
                        residual[k] += bw

        rec(0, 0)

    rep = OracleReport(_describe(topology, entity), None)
    if best[0] is not None:
        rep.optimum_cost, rep.optimal_decision = best[0]
        assert validate_decision(topology, entity, rep.optimal_decision).ok
    return rep


def brute_force_pwkgpp(entity: ServiceEntity, pwv: Mapping[int, float], tol: float,
                       capacities: Mapping[int, int], seed: int = 0) -> OracleReport:
    if len(entity.sfs) > MAX_PWKGPP_SFS:
        raise ContractError(f"exact partitioning limited to {MAX_PWKGPP_SFS} SFs")
    exact = partition_exact(entity, pwv, tol, capacities)
    rep = OracleReport({"entity": entity.to_json(), "pwv": dict(pwv), "tol": tol}, None)
    if exact is not None:
        rep.optimum_cost = cut_weight(entity, exact)
        rep.optimal_decision = MappingDecision(entity.id, exact, {})
    heur, used = partition_heuristic_detailed(entity, pwv, tol, capacities, seed=seed, relax=False)
    rep.compare("heuristic", None if heur is None else cut_weight(entity, heur))
    rep.comparison["heuristic"]["tolerance"] = used
    return rep


# ---------------------------------------------------------------------------
# reformulation checks
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    passed: bool
    detail: dict

    def to_json(self) -> dict:
        return {"passed": self.passed, **self.detail}


def verify_theorem2(entity: ServiceEntity, topology: CpnTopology,
                    balance_check: Callable = check_balance) -> CheckResult:
    """Min-cut SF mapping equals its proportion-constrained reformulation.

    The direct problem is solved by enumerating capacity-feasible assignments.
    The optimum's own proportion vector must make it feasible for the
    reformulation at zero tolerance, and the reformulation's optimum (every
    attainable vector, exact partitioning under it) must match.
    """
    sfs = sorted(sf.id for sf in entity.sfs)
    nodes = topology.node_ids
    caps = {n.id: n.cpu_available for n in topology.nodes}
    p3_best: Optional[Tuple[int, Dict[int, int]]] = None
    vectors = set()
    for combo in itertools.product(nodes, repeat=len(sfs)):
        asg = dict(zip(sfs, combo))
        load: Dict[int, int] = {}
        for s, m in asg.items():
            load[m] = load.get(m, 0) + entity.demand[s]
        if any(l > caps[m] for m, l in load.items()):
            continue
        vectors.add(tuple(sorted(load.items())))
        c = cut_weight(entity, asg)
        if p3_best is None or c < p3_best[0]:
            p3_best = (c, asg)
    if p3_best is None:
        return CheckResult(True, {"p3": None, "p4": None, "note": "infeasible"})
    rho = pwv_from_assignment(entity, p3_best[1])
    witness_ok = balance_check(entity, p3_best[1], rho, 0.0) and abs(sum(rho.values()) - 1) < 1e-9
    total = entity.total_demand
    p4_best = None
    for vec in sorted(vectors):
        pwv = {m: l / total for m, l in vec}
        asg = partition_exact(entity, pwv, 0.0, caps)
        if asg is None or not balance_check(entity, asg, pwv, 0.0):
            continue
        c = cut_weight(entity, asg)
        if p4_best is None or c < p4_best:
            p4_best = c
    passed = witness_ok and p4_best == p3_best[0]
    return CheckResult(passed, {"p3": p3_best[0], "p4": p4_best, "witness_ok": witness_ok,
                                "rho": {str(m): r for m, r in rho.items()}})


def verify_proposition1(entity: ServiceEntity, topology: CpnTopology,
                        k_paths: Optional[int] = None) -> CheckResult:
    """Exhaustive nested search over proportion vectors matches full enumeration."""
    n = topology.n_nodes
    # a K4 has at most 5 simple paths per pair, so 64 is exhaustive for these sizes
    k = k_paths if k_paths is not None else 64
    oracle = brute_force_p2a(topology, entity, k_paths)
    nested = exhaustive_nested_solve(entity, topology, PathTable(topology, k))
    nested_cost = None if nested is None else flow_cost(nested.flows, entity.lls)
    passed = nested_cost == oracle.optimum_cost and (
        nested is None or validate_decision(topology, entity, nested).ok)
    return CheckResult(passed, {"oracle": oracle.optimum_cost, "nested": nested_cost, "n_nodes": n})


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

def random_tiny_instance(rng: random.Random, max_sfs: int = MAX_SFS,
                         max_nodes: int = MAX_NODES) -> Tuple[CpnTopology, ServiceEntity]:
    """Small connected CPN and SE where CPU and bandwidth limits sometimes bind."""
    n = rng.randint(2, max_nodes)
    order = list(range(n))
    rng.shuffle(order)
    edges = {link_key(order[i], order[rng.randrange(i)]) for i in range(1, n)}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.5:
                edges.add((a, b))
    nodes = [CpnNode(i, c, c) for i, c in ((i, rng.randint(4, 14)) for i in range(n))]
    links = [CpnLink(a, b, w, w) for (a, b), w in ((e, rng.randint(2, 12)) for e in sorted(edges))]
    topo = CpnTopology(nodes, links)
    entity = generate_service_entity((2, max_sfs), rng.choice([0.2, 0.5, 0.8]), (1, 6), seed=0,
                                     bw_range=(1, 5), rng=rng)
    return topo, entity


def min_bisection(n: int, edges: Sequence[Tuple[int, int]]) -> int:
    """Fewest edges across any split into parts of sizes ceil(n/2) and floor(n/2)."""
    best = None
    for side in itertools.combinations(range(n), (n + 1) // 2):
        s = set(side)
        c = sum((a in s) != (b in s) for a, b in edges)
        best = c if best is None else min(best, c)
    return best


def bisection_gadget(n: int, edges: Sequence[Tuple[int, int]]) -> Tuple[CpnTopology, ServiceEntity]:
    """Unit-demand SE over the graph, CNs n1 and n2 joined only through a relay.

    n1 (id 0) holds ceil(n/2) units, n2 (id 1) floor(n/2), the relay (id 2)
    nothing, and links are wide enough never to bind. Every cut edge then
    travels two hops, so the optimum routing cost is twice the bisection width.
    """
    big = max(1, len(edges))
    nodes = [CpnNode(0, (n + 1) // 2, (n + 1) // 2), CpnNode(1, max(1, n // 2), n // 2),
             CpnNode(2, 1, 0)]
    links = [CpnLink(0, 2, big, big), CpnLink(1, 2, big, big)]
    entity = ServiceEntity(0, [ServiceFunction(i, 1) for i in range(n)],
                           [LogicalLink(a, b, 1) for a, b in edges])
    return CpnTopology(nodes, links), entity


def random_gadget_graph(rng: random.Random, max_n: int = MAX_SFS) -> Tuple[int, List[Tuple[int, int]]]:
    n = rng.randint(2, max_n)
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.5]
    if not edges:
        edges = [(0, 1)]
    return n, edges


def check_gadget(n: int, edges: Sequence[Tuple[int, int]]) -> CheckResult:
    topo, entity = bisection_gadget(n, edges)
    rep = brute_force_p2a(topo, entity)
    k = min_bisection(n, edges)
    return CheckResult(rep.optimum_cost == 2 * k,
                       {"n": n, "edges": [list(e) for e in edges], "bisection": k,
                        "optimum": rep.optimum_cost})


def random_partition_instance(rng: random.Random, max_sfs: int = 10):
    """Random SE with a feasible proportion vector taken from a random assignment."""
    entity = generate_service_entity((2, max_sfs), rng.choice([0.2, 0.4, 0.7]), (1, 10), seed=0,
                                     bw_range=(1, 10), rng=rng)
    k = rng.randint(1, min(4, len(entity.sfs)))
    sfs = sorted(entity.demand)
    rng.shuffle(sfs)
    # every part gets at least one SF so the vector has exactly k entries
    asg = {s: (i if i < k else rng.randrange(k)) for i, s in enumerate(sfs)}
    pwv = pwv_from_assignment(entity, asg)
    loads = {m: r * entity.total_demand for m, r in pwv.items()}
    caps = {m: int(round(l)) + rng.randint(0, 10) for m, l in loads.items()}
    return entity, pwv, caps


def sweep(n: int, seed: int) -> dict:
    """Run all four checks on `n` seeded instances each; JSON-ready."""
    rng = random.Random(seed)
    prop1, thm2, gadget, pw = [], [], [], []
    for _ in range(n):
        topo, entity = random_tiny_instance(rng)
        prop1.append(verify_proposition1(entity, topo).to_json())
        topo, entity = random_tiny_instance(rng)
        thm2.append(verify_theorem2(entity, topo).to_json())
        gadget.append(check_gadget(*random_gadget_graph(rng)).to_json())
        entity, pwv, caps = random_partition_instance(rng)
        rep = brute_force_pwkgpp(entity, pwv, 0.05, caps, seed=rng.randrange(2 ** 31))
        h = rep.comparison["heuristic"]
        pw.append({"exact": rep.optimum_cost, "heuristic": h["cost"], "gap": h["gap"],
                   "passed": h["feasible"] and h["gap"] is not None and h["gap"] >= 0})

    def block(items):
        return {"n": len(items), "passed": sum(i["passed"] for i in items), "instances": items}

    return {"seed": seed, "proposition1": block(prop1), "theorem2": block(thm2),
            "gadget": block(gadget), "pwkgpp": block(pw)}
