"""Candidate tunnels per CN pair and greedy Cut-LL routing under link capacities."""
from __future__ import annotations

import heapq
import threading
from collections import deque
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .model import CpnTopology, LinkKey, LogicalLink, Path, link_key, path_links

DEFAULT_K_PATHS = 5


def _bfs_path(adjacency: Mapping[int, Sequence[int]], src: int, dst: int,
              banned_nodes: Set[int], banned_links: Set[LinkKey]) -> Optional[Path]:
    """Lexicographically smallest among minimum-hop paths, or None."""
    if src in banned_nodes or dst in banned_nodes:
        return None
    dist = {dst: 0}
    queue = deque([dst])
    while queue and src not in dist:
        a = queue.popleft()
        for b in adjacency[a]:
            if b not in dist and b not in banned_nodes and link_key(a, b) not in banned_links:
                dist[b] = dist[a] + 1
                queue.append(b)
    if src not in dist:
        return None
    path = [src]
    cur = src
    while cur != dst:
        # adjacency lists are sorted, so the first admissible step is the smallest id
        for b in adjacency[cur]:
            if dist.get(b) == dist[cur] - 1 and link_key(cur, b) not in banned_links:
                cur = b
                break
        path.append(cur)
    return tuple(path)


def k_shortest_paths(topology: CpnTopology, src: int, dst: int, k: int) -> List[Path]:
    """Yen's deviation algorithm on hop count; ties ordered by node sequence."""
    adjacency = topology.adjacency
    first = _bfs_path(adjacency, src, dst, set(), set())
    if first is None:
        return []
    found = [first]
    candidates: List[Tuple[int, Path]] = []
    seen = {first}
    while len(found) < k:
        prev = found[-1]
        for i in range(len(prev) - 1):
            spur = prev[i]
            root = prev[: i + 1]
            banned_links = {link_key(p[i], p[i + 1]) for p in found
                            if len(p) > i + 1 and p[: i + 1] == root}
            banned_nodes = set(root[:-1])
            tail = _bfs_path(adjacency, spur, dst, banned_nodes, banned_links)
            if tail is None:
                continue
            cand = root[:-1] + tail
            if cand not in seen:
                seen.add(cand)
                heapq.heappush(candidates, (len(cand), cand))
        if not candidates:
            break
        found.append(heapq.heappop(candidates)[1])
    return found


class PathTable:
    """Up to `k_paths` loop-free candidate paths per unordered CN pair.

    Entries depend only on the topology's structure (not on availability), so
    one table serves a whole simulation run. Pairs are computed on first use
    and cached; `precompute_k_paths` fills the whole table eagerly.
    """

    def __init__(self, topology: CpnTopology, k_paths: int = DEFAULT_K_PATHS):
        if k_paths < 1:
            raise ValueError("k_paths must be >= 1")
        self.k_paths = k_paths
        self._topology = topology
        self._entries: Dict[LinkKey, List[Path]] = {}
        self._lock = threading.Lock()

    def paths(self, a: int, b: int) -> List[Path]:
        key = link_key(a, b)
        entry = self._entries.get(key)
        if entry is None:
            entry = k_shortest_paths(self._topology, key[0], key[1], self.k_paths)
            with self._lock:
                self._entries.setdefault(key, entry)
        return entry

    @property
    def entries(self) -> Dict[LinkKey, List[Path]]:
        return self._entries

    def fill(self) -> "PathTable":
        ids = self._topology.node_ids
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                self.paths(a, b)
        return self


def precompute_k_paths(topology: CpnTopology, k_paths: int = DEFAULT_K_PATHS) -> PathTable:
    return PathTable(topology, k_paths).fill()


def _oriented(path: Path, src: int) -> Path:
    return path if path[0] == src else tuple(reversed(path))


def map_cut_links(topology: CpnTopology, cut_lls: Iterable[LogicalLink],
                  assignment: Mapping[int, int], table: PathTable,
                  residual: Optional[Dict[LinkKey, int]] = None) -> Optional[Dict[LinkKey, Path]]:
    """Greedy IMCF: largest demand first, each on its cheapest feasible candidate.

    Returns the flow map (LL key -> path from the CN hosting the LL's lower-id
    endpoint), or None if some Cut-LL has no candidate with enough residual
    bandwidth on every link.
    """
    if residual is None:
        residual = {k: l.bw_available for k, l in topology.links.items()}
    else:
        residual = dict(residual)
    flows: Dict[LinkKey, Path] = {}
    for ll in sorted(cut_lls, key=lambda l: (-l.bw_demand, l.key)):
        u, v = ll.key
        a, b = assignment[u], assignment[v]
        if a == b:
            raise ValueError(f"LL {ll.key} is not cut")
        chosen = None
        # table order is (hops, node sequence), which is also (cost, hops, lexicographic)
        for p in table.paths(a, b):
            if all(residual[lk] >= ll.bw_demand for lk in path_links(p)):
                chosen = p
                break
        if chosen is None:
            return None
        for lk in path_links(chosen):
            residual[lk] -= ll.bw_demand
        flows[ll.key] = _oriented(chosen, a)
    return flows


def flow_cost(flows: Mapping[LinkKey, Path], cut_lls: Iterable[LogicalLink]) -> int:
    bw = {ll.key: ll.bw_demand for ll in cut_lls}
    return sum((len(p) - 1) * bw[k] for k, p in flows.items())
