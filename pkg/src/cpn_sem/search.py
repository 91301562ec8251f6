"""Adaptive bilevel search: distributed elite-guided PSO over proportion-weight vectors.

A particle's position is a non-negative vector with one entry per CN. It is
decoded into a mapping decision by masking it to its `dimension` largest
entries, partitioning the SE under those proportions and routing the Cut-LLs;
the decision is scored by the fragmentation fitness (lower is better).

Workers are generators that yield `WorkerMessage`s and receive the
controller's reply through `send()`. The deterministic driver steps them
round-robin on one thread; the concurrent driver runs each in its own thread
with queue channels.
"""
from __future__ import annotations

import itertools
import logging
import queue
import threading
import time
import zlib
from dataclasses import dataclass, field
from typing import Dict, Generator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .baseline import NodeRanking, rw_bfs_assign, rw_rank
from .fragmentation import FragConfig, FragScores, evaluate
from .model import (ContractError, CpnTopology, LinkKey, MappingDecision, Path,
                    ServiceEntity, cut_links, path_links)
from .partition import DEFAULT_TOLERANCE, check_balance, partition_heuristic, pwv_from_assignment
from .routing import PathTable, flow_cost, map_cut_links

logger = logging.getLogger(__name__)


@dataclass
class SearchParams:
    n_workers: int = 4
    swarm_size: int = 20
    max_iters: int = 50
    elite_size: int = 5
    local_archive_cap: int = 5
    archive_cap: int = 20
    k_paths: int = 5
    seed: int = 0
    deterministic_mode: bool = False
    balance_tolerance: float = DEFAULT_TOLERANCE
    velocity_clamp: float = 1.0
    archive_protect_best: bool = False
    init: str = "default"  # or "rwbfs"
    init_max_depth: Optional[int] = None  # None: number of CNs
    partition_trials: int = 2

    def __post_init__(self):
        for name in ("n_workers", "swarm_size", "max_iters", "elite_size",
                     "local_archive_cap", "archive_cap", "k_paths", "partition_trials"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.elite_size >= self.swarm_size:
            raise ContractError("elite_size must be smaller than swarm_size")
        if self.init not in ("default", "rwbfs"):
            raise ContractError("init must be 'default' or 'rwbfs'")


@dataclass
class Particle:
    pid: Tuple[int, int]
    position: np.ndarray
    velocity: np.ndarray
    dimension: int
    solution: Optional[MappingDecision] = None
    fitness: Optional[float] = None
    scores: Optional[FragScores] = None

    def copy(self) -> "Particle":
        return Particle(self.pid, self.position.copy(), self.velocity.copy(), self.dimension,
                        self.solution, self.fitness, self.scores)


@dataclass
class WorkerMessage:
    kind: str  # "best_particle" | "newP_request" | "terminate"
    worker: int
    payload: Optional[Particle] = None

    def __post_init__(self):
        if self.kind == "best_particle" and self.payload is None:
            raise ContractError("best_particle message needs a payload")
        if self.kind == "terminate" and self.payload is not None:
            raise ContractError("terminate message carries no payload")


def top_n_mask(position: np.ndarray, n: int) -> Optional[np.ndarray]:
    """Keep the n largest entries (ties to the lower index), renormalised to sum 1."""
    order = np.argsort(-position, kind="stable")[:n]
    out = np.zeros_like(position, dtype=float)
    out[order] = position[order]
    s = out.sum()
    if s <= 0:
        return None
    return out / s


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

class Decoder:
    """Turns a proportion vector into a scored decision for one request.

    Decoding is a pure function of the masked vector (the partitioner seed is
    derived from it), so results are cached and shared between workers.
    """

    def __init__(self, entity: ServiceEntity, topology: CpnTopology, table: PathTable,
                 params: SearchParams, frag: FragConfig):
        self.entity = entity
        self.topology = topology
        self.table = table
        self.params = params
        self.frag = frag
        self.capacities = {n.id: n.cpu_available for n in topology.nodes}
        self._cache: Dict[bytes, Optional[Tuple[MappingDecision, FragScores]]] = {}
        self._lock = threading.Lock()
        self.calls = 0

    def partition(self, rho: np.ndarray) -> Optional[Dict[int, int]]:
        pwv = {int(m): float(r) for m, r in enumerate(rho) if r > 0}
        seed = zlib.crc32(rho.tobytes()) ^ (self.params.seed & 0xFFFFFFFF)
        return partition_heuristic(self.entity, pwv, self.params.balance_tolerance,
                                   self.capacities, seed=seed,
                                   trials=self.params.partition_trials)

    def finish(self, assignment: Optional[Dict[int, int]]):
        if assignment is None:
            return None
        flows = map_cut_links(self.topology, cut_links(self.entity, assignment), assignment,
                              self.table)
        if flows is None:
            return None
        decision = MappingDecision(self.entity.id, assignment, flows)
        return decision, evaluate(self.entity, decision, self.topology, self.frag)

    def decode(self, rho: np.ndarray):
        key = rho.tobytes()
        if key in self._cache:
            return self._cache[key]
        self.calls += 1
        res = self.finish(self.partition(rho))
        with self._lock:
            self._cache[key] = res
        return res


# ---------------------------------------------------------------------------
# initialisation
# ---------------------------------------------------------------------------

def _weighted_pick(cands: Sequence[int], avail: np.ndarray, rng: np.random.Generator) -> int:
    cands = sorted(cands)
    w = np.array([avail[m] for m in cands], dtype=float)
    return int(cands[rng.choice(len(cands), p=w / w.sum())])


def init_solver(decoder: Decoder, rng: np.random.Generator, max_depth: Optional[int] = None):
    """Semi-constrained randomised breadth-first selection of candidate CNs.

    Returns (rho, assignment or None).
    """
    topo = decoder.topology
    n = topo.n_nodes
    avail = np.array([node.cpu_available for node in topo.nodes], dtype=float)
    rho = np.zeros(n)
    resourced = [m for m in range(n) if avail[m] > 0]
    if not resourced:
        return rho, None
    limit = min(n, len(decoder.entity.sfs))
    max_depth = n if max_depth is None else max_depth

    def attempt(chosen):
        r = np.zeros(n)
        caps = avail[chosen]
        r[chosen] = caps / caps.sum()
        return r, decoder.partition(r)

    first = _weighted_pick(resourced, avail, rng)
    chosen = [first]
    c_nbr = {x for x in topo.adjacency[first] if avail[x] > 0}
    u_nbr = {x for x in topo.adjacency[first] if avail[x] <= 0}
    n_nbr: set = set()
    rho, x = attempt(chosen)
    if x is not None:
        return rho, x
    depth = 0
    while len(chosen) < limit and depth <= max_depth:
        if c_nbr:
            m = _weighted_pick(c_nbr, avail, rng)
            chosen.append(m)
            c_nbr.discard(m)
            for nb in topo.adjacency[m]:
                if nb not in chosen and nb not in c_nbr:
                    (n_nbr if avail[nb] > 0 else u_nbr).add(nb)
            rho, x = attempt(chosen)
            if x is not None:
                return rho, x
        elif n_nbr:
            c_nbr, n_nbr, u_nbr = n_nbr, set(), set()
            depth += 1
        elif u_nbr:
            hop, n_nbr, u_nbr = u_nbr, set(), set()
            for m in sorted(hop):
                for nb in topo.adjacency[m]:
                    if nb not in chosen and nb not in hop:
                        (n_nbr if avail[nb] > 0 else u_nbr).add(nb)
            max_depth += 1
        else:
            break
    return rho, None


def _rwbfs_init(decoder: Decoder, rng: np.random.Generator, base: NodeRanking, perturb: bool):
    scores = dict(base.scores)
    if perturb:
        scores = {m: s * rng.uniform(0.5, 1.5) for m, s in sorted(scores.items())}
    asg = rw_bfs_assign(decoder.entity, decoder.topology, NodeRanking(scores))
    n = decoder.topology.n_nodes
    rho = np.zeros(n)
    if asg is None:
        return rho, None
    for m, r in pwv_from_assignment(decoder.entity, asg).items():
        rho[m] = r
    return rho, asg


def init_swarm(decoder: Decoder, params: SearchParams, rng: np.random.Generator,
               worker: int = 0) -> List[Particle]:
    n = decoder.topology.n_nodes
    particles = []
    ranking = rw_rank(decoder.topology) if params.init == "rwbfs" else None
    for i in range(params.swarm_size):
        if ranking is not None:
            rho, x = _rwbfs_init(decoder, rng, ranking, perturb=(i > 0))
        else:
            rho, x = init_solver(decoder, rng, params.init_max_depth)
        p = Particle((worker, i), rho, np.zeros(n), n)
        res = decoder.finish(x)
        if res is not None:
            p.solution, p.scores = res
            p.fitness = res[1].fitness
        particles.append(p)
    return particles


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def evolve_common_set(common: Sequence[Particle], elites: Sequence[Particle],
                      local_archive: Sequence[Particle], it: int, params: SearchParams,
                      decoder: Decoder, rng: np.random.Generator) -> None:
    """Elite-guided velocity/position update, top-n masking and decoding, in place."""
    guides = list(elites) + list(local_archive)
    if not guides:
        logger.debug("no elites or archive guidance; common set left unchanged")
        return
    guide_pos = np.array([g.position for g in guides])
    mean = guide_pos.mean(axis=0)
    phi = 1.0 - it / params.max_iters
    clamp = params.velocity_clamp
    for p in common:
        n = len(p.position)
        r1, r2, r3 = rng.random(n), rng.random(n), rng.random(n)
        e = guide_pos[rng.integers(len(guides))]
        v = r1 * p.velocity + r2 * (e - p.position) + phi * r3 * (mean - p.position)
        p.velocity = np.clip(v, -clamp, clamp)
        p.position = np.maximum(0.0, p.position + p.velocity)
        masked = top_n_mask(p.position, p.dimension)
        if masked is None:
            continue
        res = decoder.decode(masked)
        if res is not None:
            p.solution, p.scores = res
            p.fitness = res[1].fitness
            p.dimension = max(1, p.dimension - 1)


def _rank_key(p: Particle):
    return (p.solution is None, p.fitness if p.fitness is not None else 0.0, p.pid)


def worker_steps(worker: int, decoder: Decoder, params: SearchParams,
                 rng: np.random.Generator, trace: Optional[list] = None,
                 ) -> Generator[WorkerMessage, Optional[Particle], None]:
    particles = init_swarm(decoder, params, rng, worker)
    gbest: Optional[Particle] = None
    local_archive: List[Particle] = []
    prev_sig = None
    for it in range(1, params.max_iters + 1):
        ranked = sorted(particles, key=_rank_key)
        elites = [p for p in ranked if p.solution is not None][: params.elite_size]
        elite_ids = {p.pid for p in elites}
        common = [p for p in ranked if p.pid not in elite_ids]
        if elites and (gbest is None or elites[0].fitness < gbest.fitness):
            gbest = elites[0].copy()
            yield WorkerMessage("best_particle", worker, gbest.copy())
        sig = tuple((p.pid, p.fitness) for p in elites)
        if elites and sig == prev_sig:
            reply = yield WorkerMessage("newP_request", worker)
            if reply is not None:
                if len(local_archive) < params.local_archive_cap:
                    local_archive.append(reply)
                else:
                    worst = max(range(len(local_archive)), key=lambda i: local_archive[i].fitness)
                    if reply.fitness < local_archive[worst].fitness:
                        local_archive[worst] = reply
        prev_sig = sig
        if trace is not None:
            trace.append({"worker": worker, "iter": it,
                          "best_fitness": None if gbest is None else gbest.fitness,
                          "feasible": sum(p.solution is not None for p in particles)})
        evolve_common_set(common, elites, local_archive, it, params, decoder, rng)
    yield WorkerMessage("terminate", worker)


# ---------------------------------------------------------------------------
# controller
# ---------------------------------------------------------------------------

class Controller:
    """Owns the archive; answers worker messages."""

    def __init__(self, params: SearchParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.archive: List[Tuple[int, Particle]] = []
        self._seq = 0
        self.terminated = 0

    def _best_index(self) -> int:
        return min(range(len(self.archive)),
                   key=lambda i: (self.archive[i][1].fitness, self.archive[i][0]))

    def handle(self, msg: WorkerMessage) -> Optional[Particle]:
        if msg.kind == "best_particle":
            p = msg.payload
            if len(self.archive) < self.params.archive_cap:
                self.archive.append((self._seq, p))
                self._seq += 1
            else:
                r = int(self.rng.integers(len(self.archive)))
                if self.params.archive_protect_best and r == self._best_index():
                    return None
                if p.fitness < self.archive[r][1].fitness:
                    self.archive[r] = (self._seq, p)
                    self._seq += 1
            return None
        if msg.kind == "newP_request":
            if not self.archive:
                return None
            return self.archive[int(self.rng.integers(len(self.archive)))][1].copy()
        if msg.kind == "terminate":
            self.terminated += 1
            return None
        raise ContractError(f"unknown message kind {msg.kind!r}")

    def result(self) -> Optional[Particle]:
        if not self.archive:
            return None
        return self.archive[self._best_index()][1]


def _run_deterministic(controller: Controller, workers: List[Generator]) -> None:
    pending: Dict[int, Optional[WorkerMessage]] = {}
    for i, w in enumerate(workers):
        pending[i] = _advance(w, None, i, first=True)
    active = [i for i in range(len(workers))]
    while active:
        for i in list(active):
            msg = pending[i]
            if msg is None:  # crashed
                msg = WorkerMessage("terminate", i)
            reply = controller.handle(msg)
            if msg.kind == "terminate":
                active.remove(i)
                continue
            pending[i] = _advance(workers[i], reply, i)


def _advance(gen: Generator, reply, wid: int, first: bool = False) -> Optional[WorkerMessage]:
    try:
        return next(gen) if first else gen.send(reply)
    except StopIteration:
        return WorkerMessage("terminate", wid)
    except Exception:
        logger.warning("worker %d crashed; treating as terminated", wid, exc_info=True)
        return None


def _run_threaded(controller: Controller, workers: List[Generator]) -> None:
    inbox: "queue.Queue[WorkerMessage]" = queue.Queue()
    replies = [queue.Queue() for _ in workers]

    def loop(i: int, gen: Generator) -> None:
        msg = _advance(gen, None, i, first=True)
        while True:
            if msg is None:
                inbox.put(WorkerMessage("terminate", i))
                return
            inbox.put(msg)
            if msg.kind == "terminate":
                return
            reply = replies[i].get() if msg.kind == "newP_request" else None
            msg = _advance(gen, reply, i)

    threads = [threading.Thread(target=loop, args=(i, g), daemon=True)
               for i, g in enumerate(workers)]
    for t in threads:
        t.start()
    while controller.terminated < len(workers):
        msg = inbox.get()
        reply = controller.handle(msg)
        if msg.kind == "newP_request":
            replies[msg.worker].put(reply)
    for t in threads:
        t.join()


def controller_solve(entity: ServiceEntity, topology: CpnTopology, params: SearchParams,
                     table: Optional[PathTable] = None, frag: FragConfig = FragConfig(),
                     trace: Optional[list] = None) -> Optional[MappingDecision]:
    """Run the distributed search for one request; None means reject."""
    snapshot = topology.snapshot()
    table = table or PathTable(snapshot, params.k_paths)
    decoder = Decoder(entity, snapshot, table, params, frag)
    seeds = np.random.SeedSequence([params.seed & 0xFFFFFFFF, entity.id & 0xFFFFFFFF])
    ctl_seq, *worker_seqs = seeds.spawn(params.n_workers + 1)
    controller = Controller(params, np.random.default_rng(ctl_seq))
    workers = [worker_steps(i, decoder, params, np.random.default_rng(s), trace)
               for i, s in enumerate(worker_seqs)]
    if params.deterministic_mode:
        _run_deterministic(controller, workers)
    else:
        _run_threaded(controller, workers)
    best = controller.result()
    return None if best is None else best.solution


class AbsSolver:
    """Simulator-facing wrapper around `controller_solve`."""

    def __init__(self, table: PathTable, params: SearchParams = SearchParams(),
                 frag: FragConfig = FragConfig(), trace: bool = False):
        self.table = table
        self.params = params
        self.frag = frag
        self.trace = trace
        self.traces: List[dict] = []
        self.name = "abs" if params.init == "default" else "abs-rwbfs"

    def solve(self, entity: ServiceEntity, topology: CpnTopology) -> Optional[MappingDecision]:
        log: Optional[list] = [] if self.trace else None
        t0 = time.perf_counter()
        decision = controller_solve(entity, topology, self.params, self.table, self.frag, log)
        if log is not None:
            self.traces.append({"request": entity.id, "accepted": decision is not None,
                                "seconds": time.perf_counter() - t0, "iterations": log})
        return decision


# ---------------------------------------------------------------------------
# exhaustive nested solve (tiny instances)
# ---------------------------------------------------------------------------

def exact_route(topology: CpnTopology, cut: Sequence, assignment: Mapping[int, int],
                table: PathTable) -> Optional[Dict[LinkKey, Path]]:
    """Minimum-cost unsplittable routing over the table's candidates (branch and bound)."""
    lls = sorted(cut, key=lambda l: (-l.bw_demand, l.key))
    cands = []
    for ll in lls:
        a, b = assignment[ll.u], assignment[ll.v]
        ps = [p if p[0] == a else tuple(reversed(p)) for p in table.paths(a, b)]
        if not ps:
            return None
        cands.append(ps)
    floor = [0] * (len(lls) + 1)
    for i in range(len(lls) - 1, -1, -1):
        floor[i] = floor[i + 1] + (min(len(p) for p in cands[i]) - 1) * lls[i].bw_demand
    residual = {k: l.bw_available for k, l in topology.links.items()}
    best_cost = [None]
    best: List[Optional[List[Path]]] = [None]
    chosen: List[Path] = []

    def dfs(i: int, cost: int) -> None:
        if best_cost[0] is not None and cost + floor[i] >= best_cost[0]:
            return
        if i == len(lls):
            best_cost[0] = cost
            best[0] = chosen[:]
            return
        bw = lls[i].bw_demand
        for p in cands[i]:
            links = path_links(p)
            if any(residual[lk] < bw for lk in links):
                continue
            for lk in links:
                residual[lk] -= bw
            chosen.append(p)
            dfs(i + 1, cost + (len(p) - 1) * bw)
            chosen.pop()
            for lk in links:
                residual[lk] += bw

    dfs(0, 0)
    if best[0] is None:
        return None
    return {ll.key: p for ll, p in zip(lls, best[0])}


def exhaustive_nested_solve(entity: ServiceEntity, topology: CpnTopology, table: PathTable,
                            max_sfs: int = 6, max_nodes: int = 4) -> Optional[MappingDecision]:
    """Outer loop over every attainable proportion vector, inner exact partition + routing.

    With an exhaustive candidate table this attains the minimum LLnM cost.
    """
    sfs = sorted(sf.id for sf in entity.sfs)
    nodes = topology.node_ids
    if len(sfs) > max_sfs or len(nodes) > max_nodes:
        raise ContractError("instance exceeds exhaustive bounds")
    total = entity.total_demand
    # group every assignment by the proportion vector it induces
    by_rho: Dict[Tuple[int, ...], List[Dict[int, int]]] = {}
    for combo in itertools.product(nodes, repeat=len(sfs)):
        asg = dict(zip(sfs, combo))
        loads = [0] * len(nodes)
        for s, m in asg.items():
            loads[m] += entity.demand[s]
        by_rho.setdefault(tuple(loads), []).append(asg)
    best: Optional[Tuple[int, MappingDecision]] = None
    for loads in sorted(by_rho):
        if any(l > topology.nodes[m].cpu_available for m, l in enumerate(loads)):
            continue
        pwv = {m: l / total for m, l in enumerate(loads) if l > 0}
        for asg in by_rho[loads]:
            if not check_balance(entity, asg, pwv, 0.0):
                continue
            cut = cut_links(entity, asg)
            flows = exact_route(topology, cut, asg, table)
            if flows is None:
                continue
            c = flow_cost(flows, cut)
            if best is None or c < best[0]:
                best = (c, MappingDecision(entity.id, asg, flows))
    return None if best is None else best[1]
