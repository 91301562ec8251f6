"""`sem` command line: generate, run, validate, plot, oracle."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .baseline import RwBfsSolver
from .config import RunConfig, load_config
from .model import (AllocationError, ContractError, CpnTopology, MappingDecision, TopologyFormatError,
                    allocate, dump_workload, generate_random_cpn, load_cpn_edge_list, load_workload,
                    parse_edge_pairs, release, topology_from_edges, validate_decision)
from .routing import PathTable
from .search import AbsSolver
from .simulator import SeParams, Scenario, generate_workload, run

logger = logging.getLogger("cpn_sem")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _range(text: str):
    a, _, b = text.partition(",")
    try:
        return int(a), int(b or a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI integers, got {text!r}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.what == "topology":
        if args.edges:
            edges = parse_edge_pairs(Path(args.edges).read_text())
            topo = topology_from_edges(edges, args.cpu_range, args.bw_range, args.seed)
        else:
            topo = generate_random_cpn(args.nodes, args.links, args.cpu_range, args.bw_range,
                                       seed=args.seed)
        text = topo.to_text()
    else:
        se = SeParams(args.size_range, args.density, args.demand_range, args.bw_range)
        text = dump_workload(generate_workload(args.n, args.rate, args.mean_lifetime, se, args.seed))
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def build_topology(cfg: RunConfig) -> CpnTopology:
    t = cfg.topology
    seed = cfg.seed if t.seed is None else t.seed
    if t.kind == "random":
        return generate_random_cpn(t.n_nodes, t.n_links, t.cpu_range, t.bw_range, seed=seed)
    text = Path(t.path).read_text()
    if t.kind == "file":
        return load_cpn_edge_list(text)
    return topology_from_edges(parse_edge_pairs(text), t.cpu_range, t.bw_range, seed)


def build_workload(cfg: RunConfig):
    w = cfg.workload
    if w.path:
        return load_workload(Path(w.path).read_text())
    se = SeParams(w.size_range, w.density, w.demand_range, w.bw_range)
    seed = cfg.seed if w.seed is None else w.seed
    return generate_workload(w.n_requests, w.arrival_rate, w.mean_lifetime, se, seed)


def build_solver(cfg: RunConfig, table: PathTable, trace: bool = False):
    if cfg.solver == "rwbfs":
        return RwBfsSolver(table, cfg.baseline.damping, cfg.baseline.iters)
    return AbsSolver(table, cfg.search, cfg.frag, trace=trace)


def execute(cfg: RunConfig, out: Path, trace: bool = False) -> dict:
    """Run one scenario and write its outputs into `out`; returns the summary."""
    topo = build_topology(cfg)
    workload = build_workload(cfg)
    initial = topo.to_text()
    table = PathTable(topo, cfg.routing.k_paths)
    solver = build_solver(cfg, table, trace)
    result = run(Scenario(topo, workload, solver, cfg.profit, cfg.frag, cfg.seed))
    summary = {"solver": solver.name, "seed": cfg.seed, "config": cfg.to_json(),
               "metrics": result.summary()}
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write(out / "requests.csv", result.to_csv())
    _write(out / "decisions.jsonl", result.decisions_jsonl())
    _write(out / "topology.txt", initial)
    _write(out / "workload.jsonl", dump_workload(workload))
    if trace and isinstance(solver, AbsSolver):
        _write(out / "search_trace.jsonl",
               "".join(json.dumps(t, sort_keys=True) + "\n" for t in solver.traces))
    return summary


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    search = cfg.search
    if args.solver:
        cfg.solver = args.solver
    if args.init:
        search = dataclasses.replace(search, init=args.init)
    if args.deterministic:
        search = dataclasses.replace(search, deterministic_mode=True)
    if args.seed is not None:
        cfg.seed = args.seed
        search = dataclasses.replace(search, seed=args.seed)
    cfg.search = search
    summary = execute(cfg, Path(args.out), args.trace)
    m = summary["metrics"]
    print(f"{summary['solver']}: accepted {m.get('accepted', 0)}/{m.get('arrived', 0)} "
          f"ar={m.get('acceptance_ratio', 0):.4f} cu={m.get('cu_ratio', 0):.4f} -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def replay(trace_dir: Path) -> List[str]:
    """Re-check every accepted decision against a live ledger; returns problems found."""
    topo = load_cpn_edge_list((trace_dir / "topology.txt").read_text())
    initial = [(n.cpu_available) for n in topo.nodes]
    initial_bw = {k: l.bw_available for k, l in topo.links.items()}
    entities = {e.id: e for e in load_workload((trace_dir / "workload.jsonl").read_text())}
    problems: List[str] = []
    decisions = []
    for lineno, line in enumerate((trace_dir / "decisions.jsonl").read_text().splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        rid = obj["req_id"]
        if rid not in entities:
            problems.append(f"decisions.jsonl:{lineno}: unknown request {rid}")
            continue
        if any(r == rid for r, _ in decisions):
            problems.append(f"decisions.jsonl:{lineno}: conservation failure: request {rid} "
                            "allocated twice")
            continue
        decisions.append((rid, MappingDecision.from_json(obj["decision"])))

    events = []
    for rid, d in decisions:
        e = entities[rid]
        events.append((e.arrival_time, 1, rid, d))
        events.append((e.arrival_time + e.lifetime, 0, rid, d))
    events.sort(key=lambda ev: ev[:3])
    live = set()
    for t, kind, rid, d in events:
        e = entities[rid]
        if kind == 1:
            report = validate_decision(topo, e, d)
            if not report.ok:
                problems.append(f"request {rid}: {report.summary()}")
                continue
            try:
                allocate(topo, e, d)
                live.add(rid)
            except (AllocationError, ContractError) as exc:
                problems.append(f"request {rid}: conservation failure: {exc}")
        elif rid in live:
            try:
                release(topo, e, d)
                live.discard(rid)
            except ContractError as exc:
                problems.append(f"request {rid}: conservation failure on release: {exc}")
        if not topo.conservation_ok():
            problems.append(f"t={t!r}: conservation ledger out of balance")
            break
    if [n.cpu_available for n in topo.nodes] != initial or \
            {k: l.bw_available for k, l in topo.links.items()} != initial_bw:
        problems.append("conservation failure: resources not fully restored after all departures")

    summary_path = trace_dir / "summary.json"
    if summary_path.exists():
        accepted = json.loads(summary_path.read_text()).get("metrics", {}).get("accepted")
        n_stored = sum(1 for line in (trace_dir / "decisions.jsonl").read_text().splitlines()
                       if line.strip())
        if accepted is not None and accepted != n_stored:
            problems.append(f"summary reports {accepted} accepted but {n_stored} decisions stored")
    return problems


def cmd_validate(args) -> int:
    problems = replay(Path(args.trace))
    for p in problems:
        print(p)
    if problems:
        print(f"INVALID: {len(problems)} problem(s)")
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

PLOT_METRICS = [("cum_acceptance", "Acceptance ratio"), ("lt_ar", "LT-AR"),
                ("lt_rc_ratio", "LT-RC-Ratio"), ("cu_ratio", "CU-Ratio")]


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(PLOT_METRICS), figsize=(4 * len(PLOT_METRICS), 3.2))
    for path in args.inputs:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            logger.warning("%s has no rows; leaving its series empty", path)
            continue
        missing = [m for m, _ in PLOT_METRICS if m not in rows[0]]
        if missing:
            raise ContractError(f"{path}: missing column(s) {', '.join(missing)}")
        x = [int(r["req_id"]) + 1 for r in rows]
        for ax, (col, _) in zip(axes, PLOT_METRICS):
            ax.plot(x, [float(r[col]) for r in rows], label=Path(path).parent.name or Path(path).stem)
    for ax, (_, title) in zip(axes, PLOT_METRICS):
        ax.set_title(title)
        ax.set_xlabel("requests")
        if ax.lines:
            ax.legend(fontsize="small")
    fig.tight_layout()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(args.out)
    plt.close(fig)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    from .oracle import sweep

    report = sweep(args.sweep, args.seed)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    hard = ("proposition1", "theorem2", "gadget")
    failed = [k for k in hard if report[k]["passed"] != report[k]["n"]]
    for k in ("proposition1", "theorem2", "gadget", "pwkgpp"):
        print(f"{k}: {report[k]['passed']}/{report[k]['n']}", file=sys.stderr)
    return EXIT_INVALID if failed else EXIT_OK


# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sem", description="Service entity mapping solver and simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a topology or workload file")
    g.add_argument("what", choices=["topology", "workload"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--nodes", type=int, default=30)
    g.add_argument("--links", type=int, default=60)
    g.add_argument("--edges", help="edge-pair file (e.g. a router-level map) instead of Waxman")
    g.add_argument("--cpu-range", type=_range, default=(100, 150))
    g.add_argument("--bw-range", type=_range, default=None)
    g.add_argument("--n", type=int, default=300, help="number of requests")
    g.add_argument("--rate", type=float, default=0.1)
    g.add_argument("--mean-lifetime", type=float, default=500.0)
    g.add_argument("--size-range", type=_range, default=(5, 15))
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--demand-range", type=_range, default=(1, 20))
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="simulate a scenario")
    r.add_argument("--config")
    r.add_argument("--solver", choices=["abs", "rwbfs"])
    r.add_argument("--init", choices=["default", "rwbfs"])
    r.add_argument("--deterministic", action="store_true")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    r.add_argument("--trace", action="store_true", help="also write per-request search logs")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="replay a run directory against the constraints")
    v.add_argument("--trace", required=True)
    v.set_defaults(func=cmd_validate)

    pl = sub.add_parser("plot", help="metric time series from requests.csv files")
    pl.add_argument("--in", dest="inputs", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    o = sub.add_parser("oracle", help="brute-force verification sweep")
    o.add_argument("--sweep", type=int, default=20)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("SEM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "generate" and args.bw_range is None:
            args.bw_range = args.cpu_range if args.what == "topology" else args.demand_range
        return args.func(args)
    except UsageError as exc:
        print(f"sem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, KeyError, json.JSONDecodeError, TopologyFormatError) as exc:
        print(f"sem: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # includes ContractError from config validation
        print(f"sem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
