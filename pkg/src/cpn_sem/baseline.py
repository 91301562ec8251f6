"""RW-BFS baseline: random-walk node ranking + BFS placement, adapted for co-location."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

import numpy as np

from .model import CpnTopology, MappingDecision, ServiceEntity, cut_links
from .routing import PathTable, map_cut_links


@dataclass
class NodeRanking:
    scores: Dict[int, float]

    @property
    def order(self) -> List[int]:
        return sorted(self.scores, key=lambda m: (-self.scores[m], m))


def rw_rank(topology: CpnTopology, damping: float = 0.85, iters: int = 50) -> NodeRanking:
    """Power iteration over a resource-weighted random walk.

    A node's mass is its available CPU times the available bandwidth of its
    incident links. With probability `damping` the walker steps to a neighbour
    chosen proportionally to mass, otherwise it jumps anywhere proportionally
    to mass.
    """
    ids = topology.node_ids
    n = len(ids)
    h = np.array([
        topology.nodes[m].cpu_available
        * sum(topology.link(m, x).bw_available for x in topology.adjacency[m])
        for m in ids
    ], dtype=float)
    if h.sum() <= 0:
        return NodeRanking({m: 1.0 / n for m in ids})
    jump = h / h.sum()
    trans = np.zeros((n, n))
    for i, m in enumerate(ids):
        nbrs = topology.adjacency[m]
        mass = sum(h[x] for x in nbrs)
        if mass > 0:
            for x in nbrs:
                trans[i, x] = h[x] / mass
        else:
            trans[i] = jump
    r = jump.copy()
    for _ in range(iters):
        r = (1 - damping) * jump + damping * (trans.T @ r)
    return NodeRanking({m: float(r[i]) for i, m in enumerate(ids)})


def _bfs_order(entity: ServiceEntity):
    """SFs in BFS order from the largest-demand SF, with each SF's BFS parent."""
    start = min(entity.sfs, key=lambda s: (-s.cpu_demand, s.id)).id
    parent = {start: None}
    order = [start]
    queue = deque([start])
    while queue:
        s = queue.popleft()
        nbrs = sorted({w for w, _ in entity.adjacency[s]}, key=lambda w: (-entity.demand[w], w))
        for w in nbrs:
            if w not in parent:
                parent[w] = s
                order.append(w)
                queue.append(w)
    return order, parent


def rw_bfs_assign(entity: ServiceEntity, topology: CpnTopology,
                  ranking: NodeRanking) -> Optional[Dict[int, int]]:
    residual = {n.id: n.cpu_available for n in topology.nodes}
    ranked = ranking.order
    order, parent = _bfs_order(entity)
    asg: Dict[int, int] = {}
    for s in order:
        c = entity.demand[s]
        p = parent[s]
        host = None
        if p is not None and residual[asg[p]] >= c:
            host = asg[p]
        else:
            host = next((m for m in ranked if residual[m] >= c), None)
        if host is None:
            return None
        asg[s] = host
        residual[host] -= c
    return asg


def rw_bfs_map(entity: ServiceEntity, topology: CpnTopology, ranking: NodeRanking,
               table: PathTable) -> Optional[MappingDecision]:
    """Place SFs in BFS order, co-locating with the BFS parent when it fits,
    otherwise on the best-ranked CN with room; then route the Cut-LLs."""
    asg = rw_bfs_assign(entity, topology, ranking)
    if asg is None:
        return None
    flows = map_cut_links(topology, cut_links(entity, asg), asg, table)
    if flows is None:
        return None
    return MappingDecision(entity.id, asg, flows)


class RwBfsSolver:
    """Simulator-facing wrapper: re-ranks on the live snapshot for each request."""

    name = "rwbfs"

    def __init__(self, table: PathTable, damping: float = 0.85, iters: int = 50):
        self.table = table
        self.damping = damping
        self.iters = iters

    def solve(self, entity: ServiceEntity, topology: CpnTopology) -> Optional[MappingDecision]:
        return rw_bfs_map(entity, topology, rw_rank(topology, self.damping, self.iters), self.table)
