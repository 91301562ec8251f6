"""ABS vs RW-BFS on the desk scenario over several seeds.

Writes one run directory per (solver, seed), a comparison JSON, NRED CDFs and
the metric time series plot.

    python3 scripts/compare_desk.py --seeds 0 1 2 3 4 --out results/desk
"""
import argparse
import json
import statistics
from pathlib import Path

import numpy as np
from scipy.stats import mannwhitneyu

from cpn_sem.cli import execute, main as sem_main
from cpn_sem.config import RunConfig
from cpn_sem.search import SearchParams


def desk_config(solver: str, seed: int, init: str = "default") -> RunConfig:
    return RunConfig(seed=seed, solver=solver,
                     search=SearchParams(seed=seed, deterministic_mode=True, init=init))


def nred_values(run_dir: Path):
    out = []
    for line in (run_dir / "decisions.jsonl").read_text().splitlines():
        out.append(json.loads(line)["nred"])
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--solvers", nargs="+", default=["abs", "rwbfs"])
    ap.add_argument("--out", default="results/desk")
    args = ap.parse_args()
    out = Path(args.out)
    table = {}
    for solver in args.solvers:
        for seed in args.seeds:
            run_dir = out / f"{solver}-{seed}"
            if not (run_dir / "summary.json").exists():
                execute(desk_config(solver, seed), run_dir)
            m = json.loads((run_dir / "summary.json").read_text())["metrics"]
            table.setdefault(solver, []).append(
                {"seed": seed, "acceptance_ratio": m["acceptance_ratio"], "cu_ratio": m["cu_ratio"],
                 "lt_ar": m["lt_avg_revenue"], "lt_rc_ratio": m["lt_rc_ratio"],
                 "nred": nred_values(run_dir)})
            print(solver, seed, m["acceptance_ratio"], m["cu_ratio"], flush=True)

    report = {}
    for solver, rows in table.items():
        report[solver] = {k: statistics.median(r[k] for r in rows)
                          for k in ("acceptance_ratio", "cu_ratio", "lt_ar", "lt_rc_ratio")}
    if {"abs", "rwbfs"} <= set(table):
        a = np.concatenate([r["nred"] for r in table["abs"]])
        b = np.concatenate([r["nred"] for r in table["rwbfs"]])
        test = mannwhitneyu(a, b, alternative="greater")
        report["nred_mannwhitney_p"] = float(test.pvalue)
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for name, vals in (("ABS", a), ("RW-BFS", b)):
            x = np.sort(np.log10(vals))
            ax.step(x, np.arange(1, len(x) + 1) / len(x), where="post", label=name)
        ax.set_xlabel("log10 NRED")
        ax.set_ylabel("CDF")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "nred_cdf.png")
        sem_main(["plot", "--in", str(out / f"abs-{args.seeds[0]}" / "requests.csv"),
                  str(out / f"rwbfs-{args.seeds[0]}" / "requests.csv"),
                  "--out", str(out / "series.png")])
    (out / "comparison.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
