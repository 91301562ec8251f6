import json
from pathlib import Path

import pytest

from cpn_sem.cli import main
from cpn_sem.config import RunConfig, config_from_dict, load_config
from cpn_sem.model import ContractError

SMALL_CONFIG = {
    "seed": 3,
    "topology": {"n_nodes": 8, "n_links": 12, "cpu_range": [30, 50], "bw_range": [30, 50]},
    "workload": {"n_requests": 12, "size_range": [3, 6]},
    "search": {"n_workers": 2, "swarm_size": 6, "max_iters": 4, "elite_size": 2},
}


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL_CONFIG))
    return p


def test_config_defaults_and_unknown_keys():
    cfg = config_from_dict({})
    assert cfg.search.n_workers == 4 and cfg.routing.k_paths == 5 and cfg.frag.delta == 0.05
    with pytest.raises(ContractError):
        config_from_dict({"bogus": 1})
    with pytest.raises(ContractError):
        config_from_dict({"search": {"swarm": 3}})
    with pytest.raises(ContractError):
        config_from_dict({"search": {"k_paths": 3}})
    cfg = config_from_dict({"routing": {"k_paths": 3}, "frag": {"weights": [0.5, 0.3, 0.2]}})
    assert cfg.search.k_paths == 3 and cfg.frag.weights == (0.5, 0.3, 0.2)


def test_config_round_trip(tmp_path):
    cfg = config_from_dict(SMALL_CONFIG)
    p = tmp_path / "c.json"
    p.write_text(cfg.dumps())
    assert load_config(str(p)).dumps() == cfg.dumps()


def test_generate_reproducible(tmp_path):
    for what in ("topology", "workload"):
        a, b = tmp_path / f"{what}-a", tmp_path / f"{what}-b"
        assert main(["generate", what, "--seed", "4", "--out", str(a)]) == 0
        assert main(["generate", what, "--seed", "4", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


def test_generate_minimal_and_full_scale(tmp_path):
    out = tmp_path / "t.txt"
    assert main(["generate", "topology", "--nodes", "2", "--links", "1", "--out", str(out)]) == 0
    assert out.read_text().startswith("NODES 2\n")
    assert main(["generate", "topology", "--nodes", "100", "--links", "500",
                 "--cpu-range", "400,600", "--out", str(out)]) == 0
    assert "LINKS 500" in out.read_text()


def test_generate_invalid(tmp_path):
    assert main(["generate", "topology", "--nodes", "3", "--links", "9"]) == 1
    assert main(["generate", "nonsense"]) == 1


def test_run_validate_plot(tmp_path, config_file):
    outs = {}
    for solver in ("abs", "rwbfs"):
        out = tmp_path / solver
        assert main(["run", "--config", str(config_file), "--solver", solver, "--deterministic",
                     "--out", str(out), "--trace"]) == 0
        for f in ("summary.json", "requests.csv", "decisions.jsonl", "topology.txt",
                  "workload.jsonl"):
            assert (out / f).exists()
        assert main(["validate", "--trace", str(out)]) == 0
        outs[solver] = json.loads((out / "summary.json").read_text())
    assert outs["abs"]["metrics"]["arrived"] == outs["rwbfs"]["metrics"]["arrived"] == 12
    assert (tmp_path / "abs" / "search_trace.jsonl").exists()
    png = tmp_path / "fig.png"
    assert main(["plot", "--in", str(tmp_path / "abs" / "requests.csv"),
                 str(tmp_path / "rwbfs" / "requests.csv"), "--out", str(png)]) == 0
    assert png.stat().st_size > 0


def test_deterministic_summary_identical(tmp_path, config_file):
    for d in ("a", "b"):
        assert main(["run", "--config", str(config_file), "--deterministic",
                     "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == \
        (tmp_path / "b" / "summary.json").read_bytes()


def test_init_rwbfs_variant(tmp_path, config_file):
    assert main(["run", "--config", str(config_file), "--init", "rwbfs", "--deterministic",
                 "--out", str(tmp_path / "v")]) == 0
    assert json.loads((tmp_path / "v" / "summary.json").read_text())["solver"] == "abs-rwbfs"


@pytest.fixture
def clean_run(tmp_path, config_file):
    out = tmp_path / "run"
    assert main(["run", "--config", str(config_file), "--solver", "rwbfs", "--out", str(out)]) == 0
    return out


def test_validate_detects_corrupted_decision(clean_run, capsys):
    lines = (clean_run / "decisions.jsonl").read_text().splitlines()
    obj = json.loads(lines[0])
    first_sf = next(iter(obj["decision"]["assignment"]))
    obj["decision"]["assignment"][first_sf] = 10 ** 6
    lines[0] = json.dumps(obj)
    (clean_run / "decisions.jsonl").write_text("\n".join(lines) + "\n")
    assert main(["validate", "--trace", str(clean_run)]) == 2
    assert "Eq.(1)" in capsys.readouterr().out


def test_validate_detects_ledger_mismatch(clean_run, capsys):
    lines = (clean_run / "decisions.jsonl").read_text().splitlines()
    (clean_run / "decisions.jsonl").write_text("\n".join(lines + lines[:1]) + "\n")
    assert main(["validate", "--trace", str(clean_run)]) == 2
    assert "conservation" in capsys.readouterr().out


def test_plot_empty_csv(tmp_path, caplog):
    csv = tmp_path / "empty.csv"
    csv.write_text("req_id,t,accepted,revenue,cost,cum_acceptance,lt_ar,profit,cu_ratio,"
                   "rc_ratio,lt_rc_ratio\n")
    assert main(["plot", "--in", str(csv), "--out", str(tmp_path / "e.png")]) == 0
    assert "no rows" in caplog.text


def test_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert main(["validate"]) == 1


def test_oracle_command(tmp_path):
    out = tmp_path / "oracle.json"
    assert main(["oracle", "--sweep", "2", "--seed", "1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert set(rep) >= {"proposition1", "theorem2", "gadget", "pwkgpp"}
