"""Proportional-weight k-way partitioning of a service entity onto CNs.

Given a proportion-weight vector (CN -> fraction of the request's total CPU
demand), co-location groups are formed so that each CN receives roughly its
share while the bandwidth of the logical links crossing groups is minimised.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .model import Assignment, ContractError, ServiceEntity

logger = logging.getLogger(__name__)

PWV = Mapping[int, float]

BALANCE_EPS = 1e-9
DEFAULT_TOLERANCE = 0.05
RELAX_STEP = 0.05
RELAX_MAX = 0.25
EXACT_BOUND = 12


def support(pwv: PWV) -> List[int]:
    return sorted(m for m, r in pwv.items() if r > 0)


def validate_pwv(pwv: PWV) -> None:
    if any(r < 0 for r in pwv.values()):
        raise ContractError("proportion weights must be non-negative")
    if abs(sum(pwv.values()) - 1.0) > 1e-9:
        raise ContractError(f"proportion weights sum to {sum(pwv.values())}, expected 1")
    if not support(pwv):
        raise ContractError("proportion-weight vector has empty support")


def cut_weight(entity: ServiceEntity, assignment: Mapping[int, int]) -> int:
    return sum(ll.bw_demand for ll in entity.lls if assignment[ll.u] != assignment[ll.v])


def pwv_from_assignment(entity: ServiceEntity, assignment: Mapping[int, int]) -> Dict[int, float]:
    total = entity.total_demand
    loads: Dict[int, int] = {}
    for sf in entity.sfs:
        m = assignment[sf.id]
        loads[m] = loads.get(m, 0) + sf.cpu_demand
    return {m: c / total for m, c in sorted(loads.items())}


def check_balance(entity: ServiceEntity, assignment: Mapping[int, int], pwv: PWV,
                  theta: float) -> bool:
    total = entity.total_demand
    loads: Dict[int, int] = {}
    for sf in entity.sfs:
        m = assignment[sf.id]
        if pwv.get(m, 0.0) <= 0:
            return False
        loads[m] = loads.get(m, 0) + sf.cpu_demand
    for m in support(pwv):
        frac = loads.get(m, 0) / total
        r = pwv[m]
        if frac < (1 - theta) * r - BALANCE_EPS or frac > (1 + theta) * r + BALANCE_EPS:
            return False
    return True


def _bounds(pwv: PWV, parts: Sequence[int], total: int, theta: float,
            capacities: Mapping[int, int]) -> Tuple[List[float], List[float]]:
    slack = BALANCE_EPS * total
    lo = [(1 - theta) * pwv[m] * total - slack for m in parts]
    hi = [min((1 + theta) * pwv[m] * total + slack, capacities.get(m, 0)) for m in parts]
    return lo, hi


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------

def partition_exact(entity: ServiceEntity, pwv: PWV, theta: float,
                    capacities: Mapping[int, int], bound: int = EXACT_BOUND) -> Optional[Assignment]:
    """Minimum-cut balanced, capacity-respecting assignment by branch and bound.

    Among optimal assignments the one whose placement tuple (ordered by SF id)
    is lexicographically smallest is returned. None if infeasible.
    """
    n = len(entity.sfs)
    if n > bound:
        raise ContractError(f"{n} SFs exceeds exhaustive bound {bound}")
    validate_pwv(pwv)
    parts = support(pwv)
    total = entity.total_demand
    lo, hi = _bounds(pwv, parts, total, theta, capacities)
    sfs = sorted(entity.sfs, key=lambda s: s.id)
    index = {s.id: i for i, s in enumerate(sfs)}
    weights = [s.cpu_demand for s in sfs]
    # edges to earlier-ordered SFs only, so the cut grows incrementally
    back: List[List[Tuple[int, int]]] = [[] for _ in sfs]
    for ll in entity.lls:
        a, b = index[ll.u], index[ll.v]
        if a < b:
            a, b = b, a
        back[a].append((b, ll.bw_demand))
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + weights[i]

    k = len(parts)
    load = [0.0] * k
    place = [0] * n
    best_cut = [float("inf")]
    best_place: List[Optional[List[int]]] = [None]

    def dfs(i: int, cut: int) -> None:
        if cut >= best_cut[0]:
            return
        if i == n:
            if all(load[p] >= lo[p] for p in range(k)):
                best_cut[0] = cut
                best_place[0] = place[:]
            return
        deficit = sum(max(0.0, lo[p] - load[p]) for p in range(k))
        if deficit > suffix[i]:
            return
        w = weights[i]
        for p in range(k):
            if load[p] + w > hi[p]:
                continue
            extra = 0
            for j, bw in back[i]:
                if place[j] != p:
                    extra += bw
            load[p] += w
            place[i] = p
            dfs(i + 1, cut + extra)
            load[p] -= w

    dfs(0, 0)
    if best_place[0] is None:
        return None
    return {sfs[i].id: parts[p] for i, p in enumerate(best_place[0])}


# ---------------------------------------------------------------------------
# multilevel heuristic
# ---------------------------------------------------------------------------

@dataclass
class _Graph:
    weights: List[int]
    adj: List[Dict[int, int]]
    label: List[int]  # smallest SF id folded into each vertex; tie-break key

    @property
    def n(self) -> int:
        return len(self.weights)


def _entity_graph(entity: ServiceEntity) -> Tuple[_Graph, List[int]]:
    sfs = sorted(entity.sfs, key=lambda s: s.id)
    index = {s.id: i for i, s in enumerate(sfs)}
    adj: List[Dict[int, int]] = [{} for _ in sfs]
    for ll in entity.lls:
        a, b = index[ll.u], index[ll.v]
        adj[a][b] = adj[a].get(b, 0) + ll.bw_demand
        adj[b][a] = adj[b].get(a, 0) + ll.bw_demand
    return _Graph([s.cpu_demand for s in sfs], adj, [s.id for s in sfs]), [s.id for s in sfs]


def _coarsen(g: _Graph, max_vw: float, rng: random.Random) -> Tuple[_Graph, List[int]]:
    """One level of heavy-edge matching."""
    order = list(range(g.n))
    rng.shuffle(order)
    match = [-1] * g.n
    for u in order:
        if match[u] != -1:
            continue
        best, best_w = -1, 0
        for v, w in g.adj[u].items():
            if match[v] == -1 and v != u and g.weights[u] + g.weights[v] <= max_vw:
                if w > best_w or (w == best_w and best != -1 and g.label[v] < g.label[best]):
                    best, best_w = v, w
        match[u] = best if best != -1 else u
        if best != -1:
            match[best] = u
    cmap = [-1] * g.n
    nc = 0
    for u in range(g.n):
        if cmap[u] == -1:
            cmap[u] = nc
            cmap[match[u]] = nc
            nc += 1
    weights = [0] * nc
    label = [10 ** 18] * nc
    adj: List[Dict[int, int]] = [{} for _ in range(nc)]
    for u in range(g.n):
        cu = cmap[u]
        weights[cu] += g.weights[u]
        label[cu] = min(label[cu], g.label[u])
        for v, w in g.adj[u].items():
            cv = cmap[v]
            if cv != cu:
                adj[cu][cv] = adj[cu].get(cv, 0) + w
    return _Graph(weights, adj, label), cmap


class _State:
    """Part membership with incremental loads and per-part connectivity."""

    def __init__(self, g: _Graph, part: List[int], k: int):
        self.g = g
        self.k = k
        self.part = part
        self.load = [0] * k
        for u, p in enumerate(part):
            self.load[p] += g.weights[u]
        self.conn = [[0] * k for _ in range(g.n)]
        for u in range(g.n):
            for v, w in g.adj[u].items():
                self.conn[u][part[v]] += w

    def cut(self) -> int:
        return sum(w for u in range(self.g.n) for v, w in self.g.adj[u].items()
                   if u < v and self.part[u] != self.part[v])

    def move(self, u: int, b: int) -> None:
        a = self.part[u]
        w = self.g.weights[u]
        self.load[a] -= w
        self.load[b] += w
        self.part[u] = b
        for v, ew in self.g.adj[u].items():
            self.conn[v][a] -= ew
            self.conn[v][b] += ew

    def gain(self, u: int, b: int) -> int:
        return self.conn[u][b] - self.conn[u][self.part[u]]


def _pv(x: float, l: float, h: float) -> float:
    return (l - x if x < l else 0.0) + (x - h if x > h else 0.0)


def _violation(load: Sequence[float], lo: Sequence[float], hi: Sequence[float]) -> float:
    return sum(max(0.0, l - x) + max(0.0, x - h) for x, l, h in zip(load, lo, hi))


def _grow(g: _Graph, k: int, lo, hi, target, rng: random.Random) -> List[int]:
    """Proportional greedy seeding: grow one region per part, largest target first."""
    part = [-1] * g.n
    order = sorted(range(k), key=lambda p: (-target[p], p))
    for idx, p in enumerate(order):
        free = [u for u in range(g.n) if part[u] == -1]
        if not free:
            break
        if idx == len(order) - 1:
            for u in free:
                part[u] = p
            break
        load = 0
        conn = {u: 0 for u in free}
        seed = rng.choice(free)
        while True:
            if load >= target[p]:
                break
            cands = [u for u in conn if part[u] == -1 and load + g.weights[u] <= hi[p]]
            if not cands:
                break
            u = max(cands, key=lambda x: (conn[x], -g.label[x])) if load else seed
            if u not in cands:
                u = max(cands, key=lambda x: (conn[x], -g.label[x]))
            nxt = load + g.weights[u]
            if load >= lo[p] and abs(nxt - target[p]) >= abs(load - target[p]):
                break
            part[u] = p
            load = nxt
            for v, w in g.adj[u].items():
                if part[v] == -1:
                    conn[v] += w
    # anything left over goes to the part with the most headroom
    for u in range(g.n):
        if part[u] == -1:
            part[u] = order[-1]
    return part


def _repair(st: _State, lo, hi, max_rounds: int) -> bool:
    """Greedy moves/swaps that reduce balance violation, preferring cut gain."""
    g, k = st.g, st.k
    for _ in range(max_rounds):
        viol = _violation(st.load, lo, hi)
        if viol <= 0:
            return True
        best = None
        for u in range(g.n):
            a = st.part[u]
            w = g.weights[u]
            for b in range(k):
                if b == a:
                    continue
                dv = (_pv(st.load[a], lo[a], hi[a]) + _pv(st.load[b], lo[b], hi[b])
                      - _pv(st.load[a] - w, lo[a], hi[a]) - _pv(st.load[b] + w, lo[b], hi[b]))
                if dv <= 1e-12:
                    continue
                key = (dv, st.gain(u, b), -g.label[u], -b)
                if best is None or key > best[0]:
                    best = (key, ("move", u, b))
        if best is None:
            for u in range(g.n):
                for v in range(u + 1, g.n):
                    a, b = st.part[u], st.part[v]
                    if a == b or g.weights[u] == g.weights[v]:
                        continue
                    d = g.weights[u] - g.weights[v]
                    dv = (_pv(st.load[a], lo[a], hi[a]) + _pv(st.load[b], lo[b], hi[b])
                          - _pv(st.load[a] - d, lo[a], hi[a]) - _pv(st.load[b] + d, lo[b], hi[b]))
                    if dv <= 1e-12:
                        continue
                    gain = st.gain(u, b) + st.gain(v, a) - 2 * g.adj[u].get(v, 0)
                    key = (dv, gain, -g.label[u], -g.label[v])
                    if best is None or key > best[0]:
                        best = (key, ("swap", u, v))
        if best is None:
            return False
        op = best[1]
        if op[0] == "move":
            st.move(op[1], op[2])
        else:
            _, u, v = op
            a, b = st.part[u], st.part[v]
            st.move(u, b)
            st.move(v, a)
    return _violation(st.load, lo, hi) <= 0


def _refine(st: _State, lo, hi, max_rounds: int, swaps: bool) -> None:
    """Boundary refinement: apply the best positive-gain balanced move until none remain."""
    g, k = st.g, st.k
    for _ in range(max_rounds):
        best = None
        for u in range(g.n):
            a = st.part[u]
            w = g.weights[u]
            if st.load[a] - w < lo[a]:
                continue
            for b in range(k):
                if b == a or st.conn[u][b] == 0 or st.load[b] + w > hi[b]:
                    continue
                gain = st.gain(u, b)
                if gain <= 0:
                    continue
                key = (gain, -g.label[u], -b)
                if best is None or key > best[0]:
                    best = (key, ("move", u, b))
        if best is None and swaps:
            for u in range(g.n):
                a = st.part[u]
                for v in range(u + 1, g.n):
                    b = st.part[v]
                    if a == b or (st.conn[u][b] == 0 and st.conn[v][a] == 0):
                        continue
                    d = g.weights[u] - g.weights[v]
                    if not (lo[a] <= st.load[a] - d <= hi[a] and lo[b] <= st.load[b] + d <= hi[b]):
                        continue
                    gain = st.gain(u, b) + st.gain(v, a) - 2 * g.adj[u].get(v, 0)
                    if gain <= 0:
                        continue
                    key = (gain, -g.label[u], -g.label[v])
                    if best is None or key > best[0]:
                        best = (key, ("swap", u, v))
        if best is None:
            return
        op = best[1]
        if op[0] == "move":
            st.move(op[1], op[2])
        else:
            _, u, v = op
            a, b = st.part[u], st.part[v]
            st.move(u, b)
            st.move(v, a)


def _multilevel(base: _Graph, k: int, lo, hi, target, rng: random.Random,
                coarsen_to: int, max_rounds: int) -> Optional[Tuple[List[int], int]]:
    levels: List[Tuple[_Graph, List[int]]] = []
    g = base
    max_vw = max(max(base.weights), 0.5 * min(target)) if k > 1 else float("inf")
    while g.n > coarsen_to:
        cg, cmap = _coarsen(g, max_vw, rng)
        if cg.n > 0.9 * g.n:
            break
        levels.append((g, cmap))
        g = cg
    part = _grow(g, k, lo, hi, target, rng)
    st = _State(g, part, k)
    _repair(st, lo, hi, max_rounds)
    _refine(st, lo, hi, max_rounds, swaps=False)
    for fine, cmap in reversed(levels):
        part = [st.part[cmap[u]] for u in range(fine.n)]
        st = _State(fine, part, k)
        _repair(st, lo, hi, max_rounds)
        _refine(st, lo, hi, max_rounds, swaps=False)
    if not _repair(st, lo, hi, max_rounds):
        return None
    _refine(st, lo, hi, max_rounds, swaps=True)
    if _violation(st.load, lo, hi) > 0:
        return None
    return st.part, st.cut()


def partition_heuristic_detailed(entity: ServiceEntity, pwv: PWV, theta: float,
                                 capacities: Mapping[int, int], seed: int = 0,
                                 relax: bool = True, trials: int = 3,
                                 relax_step: float = RELAX_STEP, relax_max: float = RELAX_MAX,
                                 ) -> Tuple[Optional[Assignment], Optional[float]]:
    """Like `partition_heuristic` but also returns the tolerance actually used."""
    validate_pwv(pwv)
    parts = support(pwv)
    total = entity.total_demand
    k = len(parts)
    base, ids = _entity_graph(entity)
    rng = random.Random(seed)

    if sum(capacities.get(m, 0) for m in parts) < total:
        return None, None
    if k == 1:
        if capacities.get(parts[0], 0) >= total:
            return {s: parts[0] for s in ids}, theta
        return None, None

    tols = [theta]
    if relax:
        t = theta
        while t + relax_step <= max(relax_max, theta) + 1e-12:
            t = round(t + relax_step, 10)
            tols.append(t)
    if k > base.n:
        return None, None
    target = [pwv[m] * total for m in parts]
    coarsen_to = max(2 * k, 8)
    max_rounds = 4 * base.n + 8
    sums = _subset_sums(base.weights)

    def attempt(t):
        lo, hi = _bounds(pwv, parts, total, t, capacities)
        if sum(hi) < total - 1e-9 or any(l > h for l, h in zip(lo, hi)):
            return None
        if not all(_has_sum_in(sums, l, h) for l, h in zip(lo, hi)):
            return None
        best = None
        for _ in range(trials):
            res = _multilevel(base, k, lo, hi, target, rng, coarsen_to, max_rounds)
            if res is not None and (best is None or res[1] < best[1]):
                best = res
        return best

    def as_assignment(res):
        return {ids[u]: parts[p] for u, p in enumerate(res[0])}

    res = attempt(tols[0])
    if res is not None or len(tols) == 1:
        return (as_assignment(res), tols[0]) if res is not None else (None, None)
    # the loosest band is tried next so that hopeless vectors fail fast
    loosest = attempt(tols[-1])
    if loosest is None:
        return None, None
    for t in tols[1:-1]:
        res = attempt(t)
        if res is not None:
            return as_assignment(res), t
    return as_assignment(loosest), tols[-1]


def _subset_sums(weights: Sequence[int]) -> int:
    """Bitset of every achievable subset sum of integer weights."""
    bits = 1
    for w in weights:
        bits |= bits << w
    return bits


def _has_sum_in(bits: int, lo: float, hi: float) -> bool:
    a, b = max(0, math.ceil(lo - BALANCE_EPS)), math.floor(hi + BALANCE_EPS)
    if a > b:
        return False
    window = bits >> a
    return window & ((1 << (b - a + 1)) - 1) != 0


def partition_heuristic(entity: ServiceEntity, pwv: PWV, theta: float,
                        capacities: Mapping[int, int], seed: int = 0, relax: bool = True,
                        trials: int = 3) -> Optional[Assignment]:
    """Balanced, capacity-respecting low-cut assignment, or None when none is found.

    Multilevel scheme: heavy-edge coarsening, proportional greedy region growing
    on the coarsest graph, then balance repair and positive-gain boundary moves
    at every level on the way back up. When no assignment hits the tolerance
    band the tolerance is widened in `RELAX_STEP` increments up to `RELAX_MAX`.
    """
    return partition_heuristic_detailed(entity, pwv, theta, capacities, seed, relax, trials)[0]
