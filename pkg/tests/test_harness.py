import json

import pytest

from mecmig import cli
from mecmig.harness import (
    CORE_LEVELS,
    REQUEST_BANDS,
    SweepSpec,
    gnuplot_script,
    level_means,
    read_csv,
    run_optimal,
    run_sweep,
    summarize_sweep,
    write_csv,
)
from mecmig.scenario import ScenarioConfig
from mecmig.solver import SizeGuardError

SMALL = ScenarioConfig(eval_horizon=4)
TINY = {"n_servers": 2, "n_vehicles": 2, "batch_size": 16, "replay_capacity": 200,
        "target_interval": 20, "hidden": [16, 16], "episodes": 4, "train_horizon": 5, "eval_horizon": 5}


def test_defaults_match_reference_scenario():
    cfg = ScenarioConfig()
    assert (cfg.n_servers, cfg.n_vehicles, cfg.tx_power_dbm) == (3, 4, 30.0)
    assert (cfg.total_bandwidth, cfg.noise_psd) == (10e6, -174.0)
    assert cfg.migration_cost_range == (0.2, 0.3) and cfg.request_kbits == (50.0, 300.0)
    assert (cfg.replay_capacity, cfg.batch_size, cfg.discount) == (100_000, 1024, 0.99)


def test_config_round_trip(tmp_path):
    cfg = ScenarioConfig(cores=16, seed=9)
    cfg.save(tmp_path / "c.json")
    assert ScenarioConfig.load(tmp_path / "c.json") == cfg
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"bogus": 1})


def test_sweep_spec():
    assert SweepSpec("cores").levels == CORE_LEVELS
    assert SweepSpec("request").levels == REQUEST_BANDS
    assert SweepSpec("request").configure(SMALL, (50, 100)).request_kbits == (50.0, 100.0)
    with pytest.raises(ValueError):
        SweepSpec("speed")
    with pytest.raises(ValueError):
        SweepSpec("cores", replications=0)


def test_run_optimal_deterministic():
    a, b = run_optimal(SMALL, seed=3), run_optimal(SMALL, seed=3)
    assert a == b
    assert a.total == pytest.approx(SMALL.weights[0] * a.compute + SMALL.weights[1] * a.comm
                                    + SMALL.weights[2] * a.migration)


def test_run_optimal_guard_points_to_export():
    with pytest.raises(SizeGuardError, match="export-lp"):
        run_optimal(ScenarioConfig(n_vehicles=12, eval_horizon=2))


def test_sweep_is_paired_and_monotone():
    spec = SweepSpec("cores", levels=(4, 16, 64), replications=3)
    rows = run_sweep(SMALL, spec)
    assert len(rows) == 9
    seeds = {r["level"]: [x["seed"] for x in rows if x["level"] == r["level"]] for r in rows}
    assert seeds["4"] == seeds["16"] == seeds["64"]
    means = level_means(rows)
    assert means["4"] >= means["16"] >= means["64"]
    table = summarize_sweep(rows)
    assert [t["level"] for t in table] == ["4", "16", "64"]


def test_parallel_sweep_matches_serial():
    spec = SweepSpec("request", levels=((50, 100), (250, 300)), replications=2)
    assert run_sweep(SMALL, spec, workers=2) == run_sweep(SMALL, spec)


def test_csv_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.1 + 0.2}]
    write_csv(rows, tmp_path / "x.csv", ["a", "b"])
    back = read_csv(tmp_path / "x.csv")
    assert float(back[0]["b"]) == 0.1 + 0.2


def test_gnuplot_scripts():
    assert "reward_log.csv" in gnuplot_script("reward", "reward_log.csv", 3)
    assert "for [a=0:2]" in gnuplot_script("reward", "reward_log.csv", 3)
    assert "sweep_summary.csv" in gnuplot_script("sweep", "sweep_summary.csv")
    with pytest.raises(ValueError):
        gnuplot_script("pie", "x.csv")


# --- command line -----------------------------------------------------------------


def test_missing_config_exit_code(tmp_path, capsys):
    assert cli.main(["optimal", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_flag_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["optimal", "--bogus"])
    assert exc.value.code == 2


def test_optimal_twice_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["optimal", "--seed", "7", "--horizon", "4", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/objective.csv").read_bytes() == (tmp_path / "b/objective.csv").read_bytes()


def test_export_lp_header(tmp_path):
    assert cli.main(["export-lp", "--seed", "1", "--horizon", "3", "--out", str(tmp_path)]) == 0
    lines = [ln for ln in (tmp_path / "problem.lp").read_text().splitlines() if not ln.startswith("\\")]
    assert lines[0] == "Minimize"


def test_train_infer_sweep_pipeline(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    out = tmp_path / "run"
    assert cli.main(["train", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    for name in ("reward_log.csv", "reward_log.gp", "checkpoint.json"):
        assert (out / name).is_file()
    assert len(read_csv(out / "reward_log.csv")) == 4 * 2
    assert cli.main(["infer", "--config", str(cfg), "--checkpoint", str(out / "checkpoint.json"),
                     "--episodes", "2", "--out", str(out)]) == 0
    assert len(read_csv(out / "inference.csv")) == 2
    assert cli.main(["sweep", "--config", str(cfg), "--axis", "cores", "--replications", "2",
                     "--checkpoint", str(out / "checkpoint.json"), "--out", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert {r["method"] for r in rows} == {"optimal", "dql"}
    assert len(read_csv(out / "sweep_summary.csv")) == len(CORE_LEVELS)


def test_verify_quick(capsys):
    assert cli.main(["verify", "--quick"]) == 0
    assert "FAIL" not in capsys.readouterr().out
