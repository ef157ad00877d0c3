import csv
import json
import math

import pytest

from tandemscale import workload
from tandemscale.cli import main, run_sweep, sweep_points


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    manifest = json.loads(lines[0][len("# manifest: "):])
    return manifest, list(csv.DictReader(lines[1:]))


@pytest.fixture
def cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_gen_trace_batch(cwd):
    assert main(["gen-trace", "batch", "--n", "10", "--k", "3", "-o", "t.jsonl"]) == 0
    text = (cwd / "t.jsonl").read_text()
    assert len(text.splitlines()) == 11
    header = json.loads(text.splitlines()[0])
    assert header["K"] == 3 and header["manifest"]["subcommand"] == "gen-trace"
    assert workload.parse(cwd / "t.jsonl").n == 10


def test_gen_trace_poisson_deterministic(cwd):
    args = ["gen-trace", "poisson", "--rate", "2", "--horizon", "50", "--seed", "1", "--k", "2"]
    assert main(args + ["-o", "a.jsonl"]) == 0
    assert main(args + ["-o", "b.jsonl"]) == 0
    assert (cwd / "a.jsonl").read_bytes() == (cwd / "b.jsonl").read_bytes()


def test_gen_trace_missing_k(cwd, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen-trace", "batch", "--n", "3"])
    assert exc.value.code == 2
    assert "--k" in capsys.readouterr().err


def test_gen_trace_missing_pattern_parameters(cwd):
    assert main(["gen-trace", "batch", "--k", "2"]) == 2
    assert main(["gen-trace", "poisson", "--k", "2", "--rate", "1"]) == 2


@pytest.mark.parametrize("policy", ["proposed", "autonomous", "replication"])
def test_simulate_single_job(cwd, policy):
    main(["gen-trace", "batch", "--n", "1", "--k", "2", "-o", "one.jsonl"])
    assert main(["simulate", "one.jsonl", "--policy", policy, "--power", "1,2",
                 "-o", "cost.csv", "--trajectory", "traj.json"]) == 0
    manifest, rows = read_csv(cwd / "cost.csv")
    assert float(rows[0]["total"]) == pytest.approx(3 * math.sqrt(2), rel=1e-12)
    assert manifest["inputs"]["one.jsonl"]
    traj = json.loads((cwd / "traj.json").read_text())
    assert traj["manifest"]["subcommand"] == "simulate"
    assert traj["cost"]["total"] == pytest.approx(4.2426, abs=1e-4)


def test_simulate_unknown_policy(cwd):
    main(["gen-trace", "batch", "--n", "1", "--k", "2", "-o", "one.jsonl"])
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "one.jsonl", "--policy", "turbo"])
    assert exc.value.code == 2


def test_simulate_bad_inputs(cwd):
    (cwd / "bad.jsonl").write_text('{"K": 2}\n{"t": 2}\n{"t": 1}\n')
    assert main(["simulate", "bad.jsonl"]) == 2
    assert main(["simulate", "missing.jsonl"]) == 2
    main(["gen-trace", "batch", "--n", "1", "--k", "2", "-o", "one.jsonl"])
    assert main(["simulate", "one.jsonl", "--power", "1"]) == 2
    assert main(["simulate", "one.jsonl", "--power", "1,0.5"]) == 2


def test_audit_pass_and_negative_control(cwd):
    main(["gen-trace", "batch", "--n", "5", "--k", "3", "-o", "b.jsonl"])
    assert main(["audit", "b.jsonl", "-o", "ok.json"]) == 0
    ok = json.loads((cwd / "ok.json").read_text())
    assert ok["passed"] and ok["violations"] == 0
    assert main(["audit", "b.jsonl", "--c", "0.1", "-o", "bad.json"]) == 1
    bad = json.loads((cwd / "bad.json").read_text())
    assert not bad["passed"] and bad["violations"] > 0
    assert bad["drift"]["violations"] > 0


def test_audit_empty_trace(cwd):
    main(["gen-trace", "batch", "--n", "0", "--k", "2", "-o", "e.jsonl"])
    assert main(["audit", "e.jsonl", "-o", "e.json"]) == 0
    assert json.loads((cwd / "e.json").read_text())["passed"]


def test_optbound(cwd):
    main(["gen-trace", "batch", "--n", "1", "--k", "2", "-o", "one.jsonl"])
    assert main(["optbound", "one.jsonl", "--policy", "proposed", "-o", "o.json"]) == 0
    d = json.loads((cwd / "o.json").read_text())
    assert d["opt_e"]["cost"] == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    assert d["closed_form"] == pytest.approx(4.0)
    assert d["worst_case_ratio_bound"] == pytest.approx(18.0)
    assert d["ratios"]["vs_opt_e"] == pytest.approx(1.5, rel=1e-6)


def test_stochastic(cwd):
    (cwd / "cfg.json").write_text(json.dumps(
        {"lambda": 1, "layers": [{"m": 1, "mu": 1, "c": 1, "alpha": 2}]}))
    assert main(["stochastic", "cfg.json", "--horizon", "1e6", "--seed", "3",
                 "-o", "r.json"]) == 0
    d = json.loads((cwd / "r.json").read_text())
    L = d["layers"][0]
    assert L["closed_form"] == 3.0 and L["certificate"] == pytest.approx(3.0)
    assert abs(L["simulated_cost"] - 3.0) / 3.0 < 0.02
    assert main(["stochastic", "cfg.json", "--horizon", "1e4", "--format", "csv",
                 "-o", "r.csv"]) == 0
    _, rows = read_csv(cwd / "r.csv")
    assert float(rows[0]["certificate"]) == pytest.approx(3.0)


def test_stochastic_config_error(cwd):
    (cwd / "bad.json").write_text(json.dumps(
        {"lambda": 1, "layers": [{"m": 1, "mu": 1, "c": 1, "alpha": 0.9}]}))
    assert main(["stochastic", "bad.json"]) == 2
    (cwd / "cfg.json").write_text(json.dumps({"lambda": 1, "layers": [{"m": 1, "mu": 1}]}))
    assert main(["stochastic", "cfg.json", "--horizon", "5", "--warmup", "10"]) == 2


def test_sweep_rows_in_grid_order(cwd, monkeypatch):
    monkeypatch.setenv("TANDEMSCALE_THREADS", "2")
    grid = {"n": [1, 3], "K": [1, 2], "pattern": ["batch", "trickle"],
            "policy": ["proposed", "autonomous"]}
    (cwd / "g.json").write_text(json.dumps(grid))
    assert main(["sweep", "g.json", "-o", "s.csv"]) == 0
    _, rows = read_csv(cwd / "s.csv")
    keys = [(int(r["n"]), int(r["K"]), r["pattern"], r["policy"]) for r in rows]
    assert keys == [(n, K, p, q) for n in [1, 3] for K in [1, 2]
                    for p in ["batch", "trickle"] for q in ["proposed", "autonomous"]]
    assert all(float(r["finalbound_slack"]) >= 0 for r in rows)
    monkeypatch.setenv("TANDEMSCALE_THREADS", "1")
    assert main(["sweep", "g.json", "-o", "s1.csv"]) == 0
    assert (cwd / "s.csv").read_bytes() == (cwd / "s1.csv").read_bytes()


def test_sweep_empty_grid(cwd):
    (cwd / "g.json").write_text(json.dumps({"n": [], "K": [1, 2]}))
    assert main(["sweep", "g.json", "-o", "s.csv"]) == 0
    lines = (cwd / "s.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("n,K,pattern,policy")


def test_sweep_bad_grid(cwd, monkeypatch):
    (cwd / "g.json").write_text(json.dumps({"n": [1], "K": [1], "policy": ["nope"]}))
    assert main(["sweep", "g.json"]) == 2
    (cwd / "g2.json").write_text("[1, 2]")
    assert main(["sweep", "g2.json"]) == 2
    monkeypatch.setenv("TANDEMSCALE_THREADS", "many")
    (cwd / "g3.json").write_text(json.dumps({"n": [1], "K": [1]}))
    assert main(["sweep", "g3.json"]) == 2


def test_sweep_proposed_slack_nonnegative():
    rows = run_sweep({"n": list(range(1, 51, 7)), "K": [1, 2, 4, 8],
                      "pattern": ["batch", "trickle", "poisson"]}, threads=1)
    assert rows and all(r[-1] >= 0 for r in rows)


def test_sweep_shows_baseline_gap_on_batches():
    rows = run_sweep({"n": [16, 32], "K": [2], "policy": ["proposed", "autonomous"]})
    by = {(r[0], r[3]): r[6] for r in rows}
    for n in (16, 32):
        assert by[(n, "autonomous")] > by[(n, "proposed")]
    assert len(sweep_points({"n": [1], "K": [1]})) == 1


def test_reproducible_outputs(cwd):
    main(["gen-trace", "batch", "--n", "4", "--k", "2", "-o", "t.jsonl"])
    for name in ("a.json", "b.json"):
        assert main(["audit", "t.jsonl", "-o", name]) == 0
    assert (cwd / "a.json").read_bytes() == (cwd / "b.json").read_bytes()
