"""Substrate/request data model, resource accounting and the constraint validator.

Node, SF and link identifiers are plain ints. All resource quantities are ints so
the allocate/release ledger round-trips exactly.
"""
from __future__ import annotations

import heapq
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

Path = Tuple[int, ...]
LinkKey = Tuple[int, int]
Assignment = Dict[int, int]


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


class TopologyFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AllocationError(RuntimeError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__(f"allocation refused: {report.summary()}")


def link_key(u: int, v: int) -> LinkKey:
    return (u, v) if u < v else (v, u)


def path_links(path: Sequence[int]) -> List[LinkKey]:
    return [link_key(a, b) for a, b in zip(path, path[1:])]


# ---------------------------------------------------------------------------
# substrate
# ---------------------------------------------------------------------------

@dataclass
class CpnNode:
    id: int
    cpu_capacity: int
    cpu_available: int


@dataclass
class CpnLink:
    u: int
    v: int
    bw_capacity: int
    bw_available: int

    @property
    def key(self) -> LinkKey:
        return link_key(self.u, self.v)


@dataclass
class _Debit:
    decision: "MappingDecision"
    cpu: Dict[int, int]
    bw: Dict[LinkKey, int]


class CpnTopology:
    """Undirected substrate graph with a ledger of resident allocations.

    Solvers receive a `snapshot()` and must not mutate it; only the simulator's
    owning copy goes through `allocate`/`release`.
    """

    def __init__(self, nodes: Iterable[CpnNode], links: Iterable[CpnLink], check: bool = True):
        self.nodes: List[CpnNode] = sorted(nodes, key=lambda n: n.id)
        self.links: Dict[LinkKey, CpnLink] = {}
        for l in links:
            self.links[l.key] = l
        self.adjacency: Dict[int, List[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.links:
            self.adjacency[a].append(b)
            self.adjacency[b].append(a)
        for nbrs in self.adjacency.values():
            nbrs.sort()
        self._allocations: Dict[object, _Debit] = {}
        if check:
            self.check_invariants()

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def node_ids(self) -> List[int]:
        return [n.id for n in self.nodes]

    def node(self, nid: int) -> CpnNode:
        n = self.nodes[nid]
        if n.id != nid:
            raise KeyError(nid)
        return n

    def link(self, u: int, v: int) -> CpnLink:
        return self.links[link_key(u, v)]

    def has_link(self, u: int, v: int) -> bool:
        return link_key(u, v) in self.links

    def check_invariants(self) -> None:
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise ContractError("node ids must be 0..n-1")
        for n in self.nodes:
            if n.cpu_capacity <= 0:
                raise ContractError(f"node {n.id}: cpu_capacity must be positive")
            if not 0 <= n.cpu_available <= n.cpu_capacity:
                raise ContractError(f"node {n.id}: cpu_available out of range")
        for key, l in self.links.items():
            if l.u == l.v:
                raise ContractError(f"self-loop at node {l.u}")
            if l.u not in self.adjacency or l.v not in self.adjacency:
                raise ContractError(f"link {key} references unknown node")
            if not 0 <= l.bw_available <= l.bw_capacity:
                raise ContractError(f"link {key}: bw_available out of range")
        if not is_connected(self.adjacency):
            raise ContractError("topology is not connected")

    def snapshot(self) -> "CpnTopology":
        t = CpnTopology(
            [CpnNode(n.id, n.cpu_capacity, n.cpu_available) for n in self.nodes],
            [CpnLink(l.u, l.v, l.bw_capacity, l.bw_available) for l in self.links.values()],
            check=False,
        )
        return t

    def total_cpu_capacity(self) -> int:
        return sum(n.cpu_capacity for n in self.nodes)

    def used_cpu(self) -> int:
        return sum(n.cpu_capacity - n.cpu_available for n in self.nodes)

    def cu_ratio(self) -> float:
        total = self.total_cpu_capacity()
        return self.used_cpu() / total if total else 0.0

    def resident(self) -> List[object]:
        return list(self._allocations)

    def conservation_ok(self) -> bool:
        """Debits recorded in the ledger account exactly for consumed capacity."""
        cpu = {n.id: 0 for n in self.nodes}
        bw = {k: 0 for k in self.links}
        for rec in self._allocations.values():
            for m, c in rec.cpu.items():
                cpu[m] += c
            for k, b in rec.bw.items():
                bw[k] += b
        if any(n.cpu_capacity - n.cpu_available != cpu[n.id] for n in self.nodes):
            return False
        return all(l.bw_capacity - l.bw_available == bw[k] for k, l in self.links.items())

    def to_text(self) -> str:
        lines = [f"NODES {self.n_nodes}"]
        lines += [f"{n.id} {n.cpu_capacity}" for n in self.nodes]
        lines.append(f"LINKS {len(self.links)}")
        lines += [f"{u} {v} {l.bw_capacity}" for (u, v), l in sorted(self.links.items())]
        return "\n".join(lines) + "\n"


def is_connected(adjacency: Mapping[int, Sequence[int]]) -> bool:
    if not adjacency:
        return True
    start = next(iter(adjacency))
    seen = {start}
    queue = deque([start])
    while queue:
        a = queue.popleft()
        for b in adjacency[a]:
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return len(seen) == len(adjacency)


# ---------------------------------------------------------------------------
# requests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ServiceFunction:
    id: int
    cpu_demand: int


@dataclass(frozen=True)
class LogicalLink:
    u: int
    v: int
    bw_demand: int

    @property
    def key(self) -> LinkKey:
        return link_key(self.u, self.v)


@dataclass
class ServiceEntity:
    id: int
    sfs: List[ServiceFunction]
    lls: List[LogicalLink]
    arrival_time: float = 0.0
    lifetime: float = 1.0

    def __post_init__(self):
        self.demand = {sf.id: sf.cpu_demand for sf in self.sfs}
        self.adjacency: Dict[int, List[Tuple[int, int]]] = {sf.id: [] for sf in self.sfs}
        for ll in self.lls:
            self.adjacency[ll.u].append((ll.v, ll.bw_demand))
            self.adjacency[ll.v].append((ll.u, ll.bw_demand))

    @property
    def total_demand(self) -> int:
        return sum(self.demand.values())

    def check_invariants(self) -> None:
        if any(sf.cpu_demand <= 0 for sf in self.sfs):
            raise ContractError("SF cpu_demand must be positive")
        keys = set()
        for ll in self.lls:
            if ll.u == ll.v or ll.bw_demand <= 0:
                raise ContractError(f"bad logical link {ll}")
            if ll.key in keys:
                raise ContractError(f"duplicate logical link {ll.key}")
            keys.add(ll.key)
        if self.arrival_time < 0 or self.lifetime <= 0:
            raise ContractError("arrival_time must be >= 0 and lifetime > 0")
        adj = {s: [w for w, _ in nb] for s, nb in self.adjacency.items()}
        if not is_connected(adj):
            raise ContractError(f"service entity {self.id} is not connected")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "arrival_time": self.arrival_time,
            "lifetime": self.lifetime,
            "sfs": [{"id": s.id, "cpu": s.cpu_demand} for s in self.sfs],
            "lls": [{"u": l.u, "v": l.v, "bw": l.bw_demand} for l in self.lls],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ServiceEntity":
        se = cls(
            id=int(obj["id"]),
            sfs=[ServiceFunction(int(s["id"]), int(s["cpu"])) for s in obj["sfs"]],
            lls=[LogicalLink(int(l["u"]), int(l["v"]), int(l["bw"])) for l in obj["lls"]],
            arrival_time=float(obj["arrival_time"]),
            lifetime=float(obj["lifetime"]),
        )
        se.check_invariants()
        return se


@dataclass
class MappingDecision:
    entity_id: int
    assignment: Assignment
    flows: Dict[LinkKey, Path] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "assignment": {str(k): v for k, v in sorted(self.assignment.items())},
            "flows": [
                {"u": u, "v": v, "path": list(p)} for (u, v), p in sorted(self.flows.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "MappingDecision":
        return cls(
            entity_id=int(obj["entity_id"]),
            assignment={int(k): int(v) for k, v in obj["assignment"].items()},
            flows={link_key(int(f["u"]), int(f["v"])): tuple(int(x) for x in f["path"])
                   for f in obj["flows"]},
        )


@dataclass(frozen=True)
class ProfitParams:
    profit_exponent: float = 2.0
    cost_weight: float = 0.5

    def __post_init__(self):
        if self.profit_exponent < 1:
            raise ContractError("profit_exponent must be >= 1")
        if not 0 < self.cost_weight < 1:
            raise ContractError("cost_weight must be in (0, 1)")


# ---------------------------------------------------------------------------
# generators and parsers
# ---------------------------------------------------------------------------

WAXMAN_ALPHA = 0.5
WAXMAN_BETA = 0.2


def generate_random_cpn(n_nodes: int, n_links: int, cap_range: Tuple[int, int],
                        bw_range: Tuple[int, int], seed: int,
                        alpha: float = WAXMAN_ALPHA, beta: float = WAXMAN_BETA) -> CpnTopology:
    """Waxman-flavoured random topology with an exact link count.

    Edges are first sampled with Waxman probabilities on unit-square coordinates.
    A maximum-probability spanning tree (preferring sampled edges) guarantees
    connectivity, then low-probability extra edges are dropped or further
    pairs are drawn (weighted by Waxman probability) to hit `n_links`.
    """
    max_links = n_nodes * (n_nodes - 1) // 2
    if n_nodes < 1:
        raise ContractError("n_nodes must be >= 1")
    if n_links < n_nodes - 1 or n_links > max_links:
        raise ContractError(f"n_links={n_links} infeasible for {n_nodes} nodes")
    _check_range(cap_range, "cap_range")
    _check_range(bw_range, "bw_range")
    rng = random.Random(seed)
    xy = [(rng.random(), rng.random()) for _ in range(n_nodes)]
    pairs = [(a, b) for a in range(n_nodes) for b in range(a + 1, n_nodes)]
    diam = max((math.dist(xy[a], xy[b]) for a, b in pairs), default=1.0) or 1.0
    prob = {(a, b): alpha * math.exp(-math.dist(xy[a], xy[b]) / (beta * diam)) for a, b in pairs}
    sampled = {p for p in pairs if rng.random() < prob[p]}

    # Kruskal: sampled edges first, each group by descending probability.
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = set()
    for p in sorted(pairs, key=lambda p: (p not in sampled, -prob[p], p)):
        ra, rb = find(p[0]), find(p[1])
        if ra != rb:
            parent[ra] = rb
            tree.add(p)
    edges = tree | sampled
    extra = sorted(sampled - tree, key=lambda p: (prob[p], p))
    while len(edges) > n_links:
        edges.discard(extra.pop(0))
    if len(edges) < n_links:
        rest = [p for p in pairs if p not in edges]
        weights = [prob[p] + 1e-12 for p in rest]
        need = n_links - len(edges)
        # weighted sampling without replacement (Efraimidis-Spirakis keys)
        keys = {p: rng.random() ** (1.0 / w) for p, w in zip(rest, weights)}
        keyed = sorted(rest, key=lambda p: (-keys[p], p))
        edges.update(keyed[:need])

    nodes = [CpnNode(i, c, c) for i, c in ((i, rng.randint(*cap_range)) for i in range(n_nodes))]
    links = []
    for a, b in sorted(edges):
        bw = rng.randint(*bw_range)
        links.append(CpnLink(a, b, bw, bw))
    return CpnTopology(nodes, links)


def _check_range(r: Tuple[int, int], name: str) -> None:
    lo, hi = r
    if lo <= 0 or hi < lo:
        raise ContractError(f"{name} must be a positive interval, got {r}")


def load_cpn_edge_list(text: str) -> CpnTopology:
    """Parse the NODES/LINKS text format."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    it = iter(lines)

    def header(word):
        try:
            lineno, ln = next(it)
        except StopIteration:
            raise TopologyFormatError(f"missing {word} header")
        parts = ln.split()
        if len(parts) != 2 or parts[0] != word or not parts[1].isdigit():
            raise TopologyFormatError(f"expected '{word} <count>'", lineno)
        return int(parts[1])

    def ints(expected):
        try:
            lineno, ln = next(it)
        except StopIteration:
            raise TopologyFormatError("unexpected end of file")
        parts = ln.split()
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise TopologyFormatError(f"non-integer field in {ln!r}", lineno)
        if len(vals) != expected:
            raise TopologyFormatError(f"expected {expected} fields, got {len(vals)}", lineno)
        return lineno, vals

    n = header("NODES")
    nodes = []
    for expect_id in range(n):
        lineno, (nid, cpu) = ints(2)
        if nid != expect_id:
            raise TopologyFormatError(f"node ids must be 0..n-1 in order, got {nid}", lineno)
        if cpu <= 0:
            raise TopologyFormatError("cpu must be positive", lineno)
        nodes.append(CpnNode(nid, cpu, cpu))
    m = header("LINKS")
    links: Dict[LinkKey, CpnLink] = {}
    for _ in range(m):
        lineno, (u, v, bw) = ints(3)
        if u == v:
            raise TopologyFormatError(f"self-loop at node {u}", lineno)
        if not (0 <= u < n and 0 <= v < n):
            raise TopologyFormatError("link references unknown node", lineno)
        if bw <= 0:
            raise TopologyFormatError("bandwidth must be positive", lineno)
        if link_key(u, v) in links:
            raise TopologyFormatError(f"duplicate link {u}-{v}", lineno)
        links[link_key(u, v)] = CpnLink(u, v, bw, bw)
    leftover = next(it, None)
    if leftover is not None:
        raise TopologyFormatError("trailing content", leftover[0])
    try:
        return CpnTopology(nodes, links.values())
    except ContractError as exc:
        raise TopologyFormatError(str(exc)) from exc


def topology_from_edges(edges: Iterable[Tuple[object, object]], cap_range: Tuple[int, int],
                        bw_range: Tuple[int, int], seed: int) -> CpnTopology:
    """Build a topology from a bare edge list (e.g. a Rocketfuel map), drawing capacities.

    Node labels are relabelled to 0..n-1 in first-seen order; duplicate and
    self-loop edges are dropped.
    """
    rng = random.Random(seed)
    index: Dict[object, int] = {}
    keys: List[LinkKey] = []
    seen = set()
    for a, b in edges:
        ia = index.setdefault(a, len(index))
        ib = index.setdefault(b, len(index))
        if ia == ib:
            continue
        k = link_key(ia, ib)
        if k not in seen:
            seen.add(k)
            keys.append(k)
    nodes = []
    for i in range(len(index)):
        c = rng.randint(*cap_range)
        nodes.append(CpnNode(i, c, c))
    links = []
    for u, v in keys:
        bw = rng.randint(*bw_range)
        links.append(CpnLink(u, v, bw, bw))
    return CpnTopology(nodes, links)


def parse_edge_pairs(text: str) -> List[Tuple[str, str]]:
    """Whitespace-separated `u v [weight]` lines, as in Rocketfuel weight files."""
    out = []
    for ln in text.splitlines():
        parts = ln.split()
        if len(parts) >= 2 and not ln.lstrip().startswith("#"):
            out.append((parts[0], parts[1]))
    return out


def random_spanning_tree(n: int, rng: random.Random) -> List[LinkKey]:
    """Uniform random labelled tree on n vertices via a random Pruefer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = [rng.randrange(n) for _ in range(n - 2)]
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges = []
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append(link_key(leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    a, b = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append(link_key(a, b))
    return edges


def generate_service_entity(size_range: Tuple[int, int], density: float,
                            demand_range: Tuple[int, int], seed: int,
                            bw_range: Optional[Tuple[int, int]] = None, entity_id: int = 0,
                            arrival_time: float = 0.0, lifetime: float = 1.0,
                            rng: Optional[random.Random] = None) -> ServiceEntity:
    """Random connected SE: uniform spanning tree plus Bernoulli(density) extra pairs."""
    if size_range[0] < 2 or size_range[1] < size_range[0]:
        raise ContractError("size_range must have min >= 2")
    if not 0 <= density <= 1:
        raise ContractError("density must lie in [0, 1]")
    _check_range(demand_range, "demand_range")
    bw_range = bw_range or demand_range
    _check_range(bw_range, "bw_range")
    rng = rng or random.Random(seed)
    n = rng.randint(*size_range)
    tree = set(random_spanning_tree(n, rng))
    edges = set(tree)
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) not in tree and rng.random() < density:
                edges.add((a, b))
    sfs = [ServiceFunction(i, rng.randint(*demand_range)) for i in range(n)]
    lls = [LogicalLink(a, b, rng.randint(*bw_range)) for a, b in sorted(edges)]
    return ServiceEntity(entity_id, sfs, lls, arrival_time, lifetime)


def dump_workload(entities: Iterable[ServiceEntity]) -> str:
    return "".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in entities)


def load_workload(text: str) -> List[ServiceEntity]:
    out = []
    for lineno, ln in enumerate(text.splitlines(), 1):
        if not ln.strip():
            continue
        try:
            out.append(ServiceEntity.from_json(json.loads(ln)))
        except (KeyError, ValueError, TypeError) as exc:
            raise TopologyFormatError(f"bad workload record: {exc}", lineno) from exc
    return out


# ---------------------------------------------------------------------------
# revenue / cost / profit
# ---------------------------------------------------------------------------

def cut_links(entity: ServiceEntity, assignment: Mapping[int, int]) -> List[LogicalLink]:
    try:
        return [ll for ll in entity.lls if assignment[ll.u] != assignment[ll.v]]
    except KeyError as exc:
        raise ContractError(f"SF {exc.args[0]} missing from assignment") from None


def revenue(entity: ServiceEntity) -> int:
    return sum(sf.cpu_demand for sf in entity.sfs) + sum(ll.bw_demand for ll in entity.lls)


def cost(entity: ServiceEntity, decision: MappingDecision) -> int:
    bw = {ll.key: ll.bw_demand for ll in entity.lls}
    network = sum((len(p) - 1) * bw[k] for k, p in decision.flows.items())
    return entity.total_demand + network


def profit(accepted: Iterable[Tuple[ServiceEntity, MappingDecision]], arrived_count: int,
           params: ProfitParams) -> float:
    accepted = list(accepted)
    if arrived_count < len(accepted):
        raise ContractError("arrived_count < number accepted")
    if arrived_count == 0:
        return 0.0
    rev = sum(revenue(e) for e, _ in accepted)
    cst = sum(cost(e, d) for e, d in accepted)
    return profit_from_totals(len(accepted), arrived_count, rev, cst, params)


def profit_from_totals(n_accepted: int, n_arrived: int, total_revenue: float, total_cost: float,
                       params: ProfitParams) -> float:
    if n_arrived == 0:
        return 0.0
    ratio = n_accepted / n_arrived
    return ratio ** params.profit_exponent * (total_revenue - params.cost_weight * total_cost)


# ---------------------------------------------------------------------------
# validation and allocation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    equation: int
    message: str


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def equations(self) -> List[int]:
        return sorted({v.equation for v in self.violations})

    def summary(self) -> str:
        if self.ok:
            return "no violations"
        return "; ".join(f"Eq.({v.equation}) {v.message}" for v in self.violations)


def _debits(topology: CpnTopology, entity: ServiceEntity, decision: MappingDecision):
    cpu: Dict[int, int] = {}
    for sf in entity.sfs:
        m = decision.assignment[sf.id]
        cpu[m] = cpu.get(m, 0) + sf.cpu_demand
    bw_of = {ll.key: ll.bw_demand for ll in entity.lls}
    bw: Dict[LinkKey, int] = {}
    for k, p in decision.flows.items():
        for lk in path_links(p):
            bw[lk] = bw.get(lk, 0) + bw_of[k]
    return cpu, bw


def validate_decision(topology: CpnTopology, entity: ServiceEntity,
                      decision: MappingDecision) -> ValidationReport:
    """Check a decision against constraints (1), (3), (4), (5), (6).

    Constraint (2) (a CN hosts zero or more SFs) cannot be violated.
    """
    rep = ValidationReport()
    add = lambda eq, msg: rep.violations.append(Violation(eq, msg))
    sf_ids = {sf.id for sf in entity.sfs}
    asg = decision.assignment
    node_ids = set(topology.adjacency)

    # (1) every SF placed on exactly one existing CN
    for s in sorted(sf_ids - set(asg)):
        add(1, f"SF {s} is not placed")
    for s in sorted(set(asg) - sf_ids):
        add(1, f"unknown SF {s} in assignment")
    for s, m in sorted(asg.items()):
        if s in sf_ids and m not in node_ids:
            add(1, f"SF {s} placed on unknown CN {m}")
    placed_ok = sf_ids <= set(asg) and all(asg[s] in node_ids for s in sf_ids)

    # (3) node capacity
    if placed_ok:
        load: Dict[int, int] = {}
        for sf in entity.sfs:
            load[asg[sf.id]] = load.get(asg[sf.id], 0) + sf.cpu_demand
        for m, c in sorted(load.items()):
            avail = topology.node(m).cpu_available
            if c > avail:
                add(3, f"CN {m} load {c} exceeds available {avail}")

    ll_by_key = {ll.key: ll for ll in entity.lls}
    # (4) every Cut-LL carried by exactly one tunnel; no tunnels for anything else
    if placed_ok:
        for ll in entity.lls:
            if asg[ll.u] != asg[ll.v] and ll.key not in decision.flows:
                add(4, f"Cut-LL {ll.key} has no tunnel")
    for k in sorted(decision.flows):
        if k not in ll_by_key:
            add(4, f"flow for unknown LL {k}")

    # (5) tunnel endpoints coherent with placement; path must be a real loop-free path
    bw_use: Dict[LinkKey, int] = {}
    for k, p in sorted(decision.flows.items()):
        ll = ll_by_key.get(k)
        if ll is None:
            continue
        if len(p) < 2 or len(set(p)) != len(p):
            add(5, f"flow {k} path {p} is not a loop-free path")
            continue
        bad_hop = [lk for lk in path_links(p) if lk not in topology.links]
        if bad_hop:
            add(5, f"flow {k} uses non-existent NL(s) {bad_hop}")
            continue
        if placed_ok:
            ends = {asg[ll.u], asg[ll.v]}
            if asg[ll.u] == asg[ll.v]:
                add(5, f"flow {k} tunnels a co-located LL")
            elif {p[0], p[-1]} != ends:
                add(5, f"flow {k} path ends {p[0]},{p[-1]} do not match placement {sorted(ends)}")
        for lk in path_links(p):
            bw_use[lk] = bw_use.get(lk, 0) + ll.bw_demand

    # (6) link capacity
    for lk, b in sorted(bw_use.items()):
        avail = topology.links[lk].bw_available
        if b > avail:
            add(6, f"NL {lk} load {b} exceeds available {avail}")
    return rep


def allocate(topology: CpnTopology, entity: ServiceEntity, decision: MappingDecision) -> CpnTopology:
    """Debit resources for an accepted decision, atomically. Mutates and returns `topology`."""
    if entity.id in topology._allocations:
        raise ContractError(f"entity {entity.id} already allocated")
    rep = validate_decision(topology, entity, decision)
    if not rep.ok:
        raise AllocationError(rep)
    cpu, bw = _debits(topology, entity, decision)
    for m, c in cpu.items():
        topology.nodes[m].cpu_available -= c
    for lk, b in bw.items():
        topology.links[lk].bw_available -= b
    topology._allocations[entity.id] = _Debit(decision, cpu, bw)
    return topology


def release(topology: CpnTopology, entity: ServiceEntity, decision: MappingDecision) -> CpnTopology:
    rec = topology._allocations.get(entity.id)
    if rec is None:
        raise ContractError(f"entity {entity.id} is not allocated")
    if rec.decision is not decision and rec.decision != decision:
        raise ContractError(f"entity {entity.id} was allocated with a different decision")
    for m, c in rec.cpu.items():
        topology.nodes[m].cpu_available += c
    for lk, b in rec.bw.items():
        topology.links[lk].bw_available += b
    del topology._allocations[entity.id]
    return topology
