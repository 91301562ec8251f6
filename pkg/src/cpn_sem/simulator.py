"""Online discrete-event simulation of request arrivals and departures."""
from __future__ import annotations

import csv
import heapq
import io
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Protocol, Tuple

from .fragmentation import FragConfig, evaluate
from .model import (AllocationError, CpnTopology, MappingDecision, ProfitParams, ServiceEntity,
                    allocate, cost, generate_service_entity, profit_from_totals, release, revenue)

logger = logging.getLogger(__name__)

CSV_FIELDS = ["req_id", "t", "accepted", "revenue", "cost", "cum_acceptance", "lt_ar", "profit",
              "cu_ratio", "rc_ratio", "lt_rc_ratio"]


class Solver(Protocol):
    name: str

    def solve(self, entity: ServiceEntity, topology: CpnTopology) -> Optional[MappingDecision]:
        ...


@dataclass
class SeParams:
    size_range: Tuple[int, int] = (50, 100)
    density: float = 0.9
    demand_range: Tuple[int, int] = (1, 20)
    bw_range: Tuple[int, int] = (1, 20)


def generate_workload(n_requests: int, arrival_rate: float = 0.1, mean_lifetime: float = 500.0,
                      se_params: SeParams = SeParams(), seed: int = 0) -> List[ServiceEntity]:
    """Poisson arrivals, exponential lifetimes, random SE graphs; deterministic per seed."""
    if arrival_rate <= 0 or mean_lifetime <= 0:
        raise ValueError("arrival_rate and mean_lifetime must be positive")
    rng = random.Random(seed)
    out = []
    t = 0.0
    for i in range(n_requests):
        t += rng.expovariate(arrival_rate)
        life = rng.expovariate(1.0 / mean_lifetime)
        out.append(generate_service_entity(se_params.size_range, se_params.density,
                                           se_params.demand_range, seed=0,
                                           bw_range=se_params.bw_range, entity_id=i,
                                           arrival_time=t, lifetime=life, rng=rng))
    return out


@dataclass
class Scenario:
    topology: CpnTopology
    workload: List[ServiceEntity]
    solver: Solver
    profit: ProfitParams = ProfitParams()
    frag: FragConfig = FragConfig()
    seed: int = 0

    def __post_init__(self):
        times = [e.arrival_time for e in self.workload]
        if times != sorted(times):
            raise ValueError("workload must be sorted by arrival_time")


@dataclass
class MetricsSnapshot:
    t: float
    arrived: int
    accepted: int
    acceptance_ratio: float
    cum_revenue: float
    cum_cost: float
    lt_avg_revenue: float
    profit: float
    cu_ratio: float
    rc_ratio: float
    lt_rc_ratio: float


@dataclass
class RequestRecord:
    req_id: int
    t: float
    accepted: bool
    revenue: int
    cost: int
    decision: Optional[MappingDecision] = None
    nred: Optional[float] = None
    cbug: Optional[float] = None
    pnvl: Optional[float] = None
    error: Optional[str] = None


@dataclass
class SimState:
    topology: CpnTopology
    params: ProfitParams
    arrived: int = 0
    accepted: int = 0
    cum_revenue: int = 0
    cum_cost: int = 0
    # time integrals of resident revenue/cost, for the long-term revenue-to-cost ratio
    rev_time: float = 0.0
    cost_time: float = 0.0
    resident_rev: int = 0
    resident_cost: int = 0
    clock: float = 0.0

    def advance(self, t: float) -> None:
        dt = t - self.clock
        if dt > 0:
            self.rev_time += self.resident_rev * dt
            self.cost_time += self.resident_cost * dt
            self.clock = t


def compute_metrics(state: SimState, t: float) -> MetricsSnapshot:
    ratio = state.accepted / state.arrived if state.arrived else 0.0
    return MetricsSnapshot(
        t=t,
        arrived=state.arrived,
        accepted=state.accepted,
        acceptance_ratio=ratio,
        cum_revenue=state.cum_revenue,
        cum_cost=state.cum_cost,
        lt_avg_revenue=state.cum_revenue / t if t > 0 else 0.0,
        profit=profit_from_totals(state.accepted, state.arrived, state.cum_revenue,
                                  state.cum_cost, state.params),
        cu_ratio=state.topology.cu_ratio(),
        rc_ratio=state.cum_revenue / state.cum_cost if state.cum_cost else 0.0,
        lt_rc_ratio=state.rev_time / state.cost_time if state.cost_time > 0 else 0.0,
    )


@dataclass
class Trace:
    snapshots: List[MetricsSnapshot] = field(default_factory=list)
    records: List[RequestRecord] = field(default_factory=list)
    invalid_decisions: int = 0
    conservation_ok: bool = True
    final_topology: Optional[CpnTopology] = None

    def summary(self) -> dict:
        last = self.snapshots[-1] if self.snapshots else None
        out = asdict(last) if last else {}
        out["invalid_decisions"] = self.invalid_decisions
        out["conservation_ok"] = self.conservation_ok
        out["n_requests"] = len(self.records)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for rec, snap in zip(self.records, self.snapshots):
            w.writerow([rec.req_id, repr(rec.t), int(rec.accepted), rec.revenue, rec.cost,
                        repr(snap.acceptance_ratio), repr(snap.lt_avg_revenue), repr(snap.profit),
                        repr(snap.cu_ratio), repr(snap.rc_ratio), repr(snap.lt_rc_ratio)])
        return buf.getvalue()

    def decisions_jsonl(self) -> str:
        lines = []
        for rec in self.records:
            if rec.accepted:
                lines.append(json.dumps({"req_id": rec.req_id, "decision": rec.decision.to_json(),
                                         "nred": rec.nred, "cbug": rec.cbug, "pnvl": rec.pnvl},
                                        sort_keys=True))
        return "".join(l + "\n" for l in lines)


def run(scenario: Scenario) -> Trace:
    topo = scenario.topology
    state = SimState(topo, scenario.profit)
    trace = Trace(final_topology=topo)
    by_id = {e.id: e for e in scenario.workload}
    decisions: Dict[int, MappingDecision] = {}
    resident_values: Dict[int, Tuple[int, int]] = {}
    events: List[Tuple[float, int, int]] = []  # (time, 0=departure/1=arrival, id)
    for e in scenario.workload:
        heapq.heappush(events, (e.arrival_time, 1, e.id))
    while events:
        t, kind, rid = heapq.heappop(events)
        state.advance(t)
        entity = by_id[rid]
        if kind == 0:
            release(topo, entity, decisions.pop(rid))
            r, c = resident_values.pop(rid)
            state.resident_rev -= r
            state.resident_cost -= c
            if not topo.conservation_ok():
                trace.conservation_ok = False
            continue

        state.arrived += 1
        rev = revenue(entity)
        rec = RequestRecord(rid, t, False, rev, 0)
        snapshot = topo.snapshot()
        try:
            decision = scenario.solver.solve(entity, snapshot)
        except Exception as exc:  # a crashing solver rejects the request only
            logger.error("solver failed on request %d: %s", rid, exc, exc_info=True)
            decision, rec.error = None, repr(exc)
        if decision is not None:
            scores = evaluate(entity, decision, snapshot, scenario.frag)
            try:
                allocate(topo, entity, decision)
            except AllocationError as exc:
                logger.error("request %d: invalid decision from solver: %s", rid, exc)
                trace.invalid_decisions += 1
                rec.error = str(exc)
            else:
                c = cost(entity, decision)
                rec.accepted, rec.cost, rec.decision = True, c, decision
                rec.nred, rec.cbug, rec.pnvl = scores.nred, scores.cbug, scores.pnvl
                decisions[rid] = decision
                resident_values[rid] = (rev, c)
                state.resident_rev += rev
                state.resident_cost += c
                state.accepted += 1
                state.cum_revenue += rev
                state.cum_cost += c
                heapq.heappush(events, (t + entity.lifetime, 0, rid))
        if not topo.conservation_ok():
            trace.conservation_ok = False
        trace.records.append(rec)
        trace.snapshots.append(compute_metrics(state, t))
    return trace
