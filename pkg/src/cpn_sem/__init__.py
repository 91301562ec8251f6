"""Service entity mapping for computing power networks: solvers, simulator, oracles."""
from .model import (AllocationError, ContractError, CpnLink, CpnNode, CpnTopology, LogicalLink,
                    MappingDecision, ProfitParams, ServiceEntity, ServiceFunction,
                    TopologyFormatError, allocate, cost, generate_random_cpn,
                    generate_service_entity, profit, release, revenue, validate_decision)
from .fragmentation import FragConfig, FragScores, cbug, evaluate, fitness, nred, pnvl
from .partition import partition_exact, partition_heuristic
from .routing import PathTable, k_shortest_paths, map_cut_links, precompute_k_paths
from .baseline import RwBfsSolver, rw_bfs_map, rw_rank
from .search import AbsSolver, SearchParams, controller_solve, exhaustive_nested_solve
from .simulator import Scenario, SeParams, generate_workload, run

__version__ = "0.1.0"
