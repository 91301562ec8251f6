"""Fragmentation metrics (NRED, CBUG, PNVL) and the scalar fitness built from them.

Higher metric values mean less fragmentation; the fitness is the reciprocal of
their weighted sum, so the search minimises it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

from .model import ContractError, CpnTopology, MappingDecision, ServiceEntity


@dataclass(frozen=True)
class FragConfig:
    delta: float = 0.05
    eps: float = 1e-6
    eps_prime: float = 1e-3
    weights: Tuple[float, float, float] = (0.6, 0.3, 0.1)
    # "as-written" divides the forwarding-node sum by e^{-hops} (longer paths score
    # higher); "corrected" divides by e^{+hops} so that long paths are penalised.
    pnvl_exponent_sign: str = "as-written"

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise ContractError("delta must be in [0, 1)")
        if not 0 < self.eps < self.eps_prime:
            raise ContractError("need 0 < eps < eps_prime")
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise ContractError("weights must be three non-negative numbers")
        if abs(sum(self.weights) - 1) > 1e-9:
            raise ContractError("weights must sum to 1")
        if self.pnvl_exponent_sign not in ("as-written", "corrected"):
            raise ContractError("pnvl_exponent_sign must be 'as-written' or 'corrected'")


@dataclass(frozen=True)
class FragScores:
    nred: float
    cbug: float
    pnvl: float
    fitness: float


def node_usage(entity: ServiceEntity, decision: MappingDecision) -> Tuple[Dict[int, int], Dict[int, int]]:
    """CPU placed on each participating CN, and Cut-LL bandwidth touching it."""
    p_c: Dict[int, int] = {}
    for sf in entity.sfs:
        m = decision.assignment[sf.id]
        p_c[m] = p_c.get(m, 0) + sf.cpu_demand
    p_bw = {m: 0 for m in p_c}
    asg = decision.assignment
    for ll in entity.lls:
        a, b = asg[ll.u], asg[ll.v]
        if a != b:
            p_bw[a] += ll.bw_demand
            p_bw[b] += ll.bw_demand
    return p_c, p_bw


def nred(entity: ServiceEntity, decision: MappingDecision, topology: CpnTopology,
         config: FragConfig = FragConfig()) -> float:
    p_c, _ = node_usage(entity, decision)
    if not p_c:
        raise ContractError("no participating CNs")
    num = 0.0
    penalty = 0
    for m, used in p_c.items():
        ratio = used / topology.nodes[m].cpu_available
        num += ratio
        penalty += math.ceil(max(1 - ratio - config.delta, 0.0))
    return num / (penalty + config.eps)


def cbug(entity: ServiceEntity, decision: MappingDecision,
         config: FragConfig = FragConfig()) -> float:
    p_c, p_bw = node_usage(entity, decision)
    if not p_c:
        raise ContractError("no participating CNs")
    return sum(p_c[m] / (p_bw[m] + config.eps) for m in p_c) / len(p_c)


def pnvl(entity: ServiceEntity, decision: MappingDecision, topology: CpnTopology,
         config: FragConfig = FragConfig()) -> float:
    p_c, _ = node_usage(entity, decision)
    bw = {ll.key: ll.bw_demand for ll in entity.lls}
    sign = 1.0 if config.pnvl_exponent_sign == "as-written" else -1.0
    total = 0.0
    for k, path in decision.flows.items():
        forwarding = path[1:-1]
        s = sum(bw[k] / (topology.nodes[m].cpu_available - p_c.get(m, 0) + config.eps)
                for m in forwarding)
        total += s * math.exp(sign * len(forwarding))
    return (total + config.eps_prime) / (len(decision.flows) + config.eps)


def combine(n: float, c: float, p: float, config: FragConfig = FragConfig()) -> float:
    w1, w2, w3 = config.weights
    denom = w1 * n + w2 * c + w3 * p
    if denom <= 0:
        raise ContractError("weighted metric sum is zero")
    return 1.0 / denom


def evaluate(entity: ServiceEntity, decision: MappingDecision, topology: CpnTopology,
             config: FragConfig = FragConfig()) -> FragScores:
    n = nred(entity, decision, topology, config)
    c = cbug(entity, decision, config)
    p = pnvl(entity, decision, topology, config)
    return FragScores(n, c, p, combine(n, c, p, config))


def fitness(entity: ServiceEntity, decision: MappingDecision, topology: CpnTopology,
            config: FragConfig = FragConfig()) -> float:
    return evaluate(entity, decision, topology, config).fitness
