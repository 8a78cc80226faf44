#!/usr/bin/env python3
"""
Tests for the command-line interface
"""

import json
import os

import pandas as pd
import pytest
from click.testing import CliRunner

from config import DATA_DIR
from main import PairScout, cli, load_run_config, parse_accel
from design_space.accel_space import AccelSpace, UnknownPresetError
from search.performance import ConfigError

TOY_CNN = os.path.join(DATA_DIR, "toy_cnn.json")
QUIET = ["--log-level", "WARNING"]

SMALL_RUN = {
    "seed": 1,
    "budget": 6,
    "policy": {"initial_corpus": 4, "stack_schedule": [1], "candidate_pool": 8},
    "cnn_space": {"depth_cap": 2, "level_size_cap": 8},
    "accel_space": {"p_ib": [1], "p_if": [16], "p_ix": [1, 2], "p_iy": [1, 2], "p_of": [1], "p_k": [3],
                    "batch": [1], "act_buf_mb": [8], "wgt_buf_mb": [8], "mask_buf_mb": [1], "mem_types": ["HBM"]},
    "embedding": {"dimension": 2, "epochs": 30},
    "surrogate": {"branch_widths": [8], "head_widths": [8], "epochs": 10, "mc_samples": 4},
    "gobi": {"max_steps": 5, "restarts": 2},
}


@pytest.fixture
def runner():
    return CliRunner()


def write_json(path, data) -> str:
    path.write_text(json.dumps(data))
    return str(path)


def test_accel_cardinality(runner):
    result = runner.invoke(cli, QUIET + ["space", "accel", "--cardinality"])
    assert result.exit_code == 0
    assert result.output.strip() == "228433920"


def test_accel_sample_is_seeded(runner):
    first = runner.invoke(cli, QUIET + ["space", "accel", "--sample", "3", "--seed", "4"])
    second = runner.invoke(cli, QUIET + ["space", "accel", "--sample", "3", "--seed", "4"])
    assert first.exit_code == 0
    assert first.output == second.output
    assert len(first.output.strip().splitlines()) == 3


def test_accel_space_needs_an_action(runner):
    assert runner.invoke(cli, QUIET + ["space", "accel"]).exit_code == 1


def test_sim_is_deterministic(runner):
    args = QUIET + ["sim", "--cnn", TOY_CNN, "--accel", "SPRING", "--accuracy", "0.9"]
    first = runner.invoke(cli, args)
    second = runner.invoke(cli, args)
    assert first.exit_code == 0
    assert first.output == second.output
    data = json.loads(first.output)
    assert data["record"]["accuracy"] == 0.9
    assert data["record"]["latency_ms"] > 0
    assert data["accel"]["mem_type"] == "RRAM"


def test_sim_accepts_an_explicit_vector(runner):
    vector = "1,16,8,8,8,3,3,1,12,24,4,RRAM,16x2x2"
    by_vector = json.loads(runner.invoke(cli, QUIET + ["sim", "--cnn", TOY_CNN, "--accel", vector]).output)
    by_name = json.loads(runner.invoke(cli, QUIET + ["sim", "--cnn", TOY_CNN, "--accel", "spring"]).output)
    assert by_vector["record"] == by_name["record"]


def test_sim_rejects_unknown_presets_and_bad_vectors(runner):
    assert runner.invoke(cli, QUIET + ["sim", "--cnn", TOY_CNN, "--accel", "NOPE"]).exit_code == 1
    assert runner.invoke(cli, QUIET + ["sim", "--cnn", TOY_CNN, "--accel", "1,2,3"]).exit_code == 1
    bad_kernel = "1,16,8,8,8,3,5,1,12,24,4,RRAM,16x2x2"
    assert runner.invoke(cli, QUIET + ["sim", "--cnn", TOY_CNN, "--accel", bad_kernel]).exit_code == 1


def test_parse_accel_helpers():
    space = AccelSpace()
    config = parse_accel("1,16,8,8,8,3,3,1,12,24,4,hbm,32x1x4", space)
    assert config.mem_type == "HBM" and config.mem_config == (32, 1, 4)
    with pytest.raises(UnknownPresetError):
        parse_accel("NOPE", space)


def test_load_run_config_rejects_unknown_sections(tmp_path):
    assert load_run_config(None) == {}
    assert load_run_config(write_json(tmp_path / "ok.json", {"seed": 3}))["seed"] == 3
    with pytest.raises(ConfigError):
        load_run_config(write_json(tmp_path / "bad.json", {"colour": "blue"}))
    with pytest.raises(ConfigError):
        load_run_config(write_json(tmp_path / "list.json", [1, 2]))


def test_pareto_command(runner, tmp_path):
    trace = tmp_path / "trace.csv"
    pd.DataFrame([
        {"iteration": 0, "digest": "aa", "latency_ms": 1.0, "area_mm2": 1.0, "e_dyn_mJ": 1.0, "e_leak_mJ": 0.1,
         "accuracy": 0.9, "status": "ok"},
        {"iteration": 1, "digest": "bb", "latency_ms": 2.0, "area_mm2": 1.0, "e_dyn_mJ": 1.0, "e_leak_mJ": 0.1,
         "accuracy": 0.95, "status": "ok"},
        {"iteration": 2, "digest": "cc", "latency_ms": 3.0, "area_mm2": 1.0, "e_dyn_mJ": 1.0, "e_leak_mJ": 0.1,
         "accuracy": 0.8, "status": "ok"},
    ]).to_csv(trace, index=False)
    result = runner.invoke(cli, QUIET + ["pareto", "--trace", str(trace), "--objective", "latency"])
    assert result.exit_code == 0
    assert "2 non-dominated record(s)" in result.output
    rows = json.loads(runner.invoke(cli, QUIET + ["pareto", "--trace", str(trace), "--json"]).output)
    assert [row["digest"] for row in rows] == ["aa", "bb"]


def test_export_command(runner, tmp_path):
    trace = tmp_path / "trace.csv"
    pd.DataFrame([{"iteration": 0, "digest": "aa", "latency_ms": 1.0, "area_mm2": 1.0, "e_dyn_mJ": 1.0,
                   "e_leak_mJ": 0.1, "accuracy": 0.9, "status": "ok"}]).to_csv(trace, index=False)
    out = tmp_path / "out"
    result = runner.invoke(cli, QUIET + ["export", "--trace", str(trace), "--format", "json",
                                         "--output-dir", str(out)])
    assert result.exit_code == 0
    with open(out / "trace.json") as f:
        assert json.load(f)["trace"][0]["digest"] == "aa"


def test_malformed_run_config_exits_one_with_a_manifest(runner, tmp_path):
    config = tmp_path / "broken.json"
    config.write_text("{not json")
    out = tmp_path / "runs"
    result = runner.invoke(cli, QUIET + ["search", "run", "--config", str(config), "--output-dir", str(out)])
    assert result.exit_code == 1
    with open(out / "manifest.json") as f:
        manifest = json.load(f)
    assert manifest["status"] == "failed" and manifest["exit_code"] == 1


def test_unknown_config_keys_exit_one(runner, tmp_path):
    config = write_json(tmp_path / "run.json", {**SMALL_RUN, "policy": {"gamma_p": 0.1}})
    out = tmp_path / "runs"
    result = runner.invoke(cli, QUIET + ["search", "run", "--config", config, "--output-dir", str(out)])
    assert result.exit_code == 1
    assert os.path.exists(out / "manifest.json")


def test_infeasible_constraints_exit_three(runner, tmp_path):
    config = write_json(tmp_path / "run.json", {**SMALL_RUN, "constraints": {"max_area_mm2": 0.001}})
    out = tmp_path / "runs"
    result = runner.invoke(cli, QUIET + ["search", "run", "--config", config, "--output-dir", str(out)])
    assert result.exit_code == 3
    with open(out / "manifest.json") as f:
        assert json.load(f)["status"] == "infeasible"


def test_small_search_run_writes_reports(runner, tmp_path):
    config = write_json(tmp_path / "run.json", SMALL_RUN)
    out = tmp_path / "runs"
    result = runner.invoke(cli, QUIET + ["search", "run", "--config", config, "--output-dir", str(out)])
    assert result.exit_code == 2
    for name in ("trace.csv", "summary.json", "trace.xlsx", "manifest.json"):
        assert os.path.exists(out / name)
    trace = pd.read_csv(out / "trace.csv")
    assert len(trace) == 6
    with open(out / "manifest.json") as f:
        manifest = json.load(f)
    assert manifest["exit_code"] == 2
    assert manifest["status"] == "budget-exhausted"
    assert manifest["seed"] == 1
    assert set(manifest["timings"]) == {"setup", "search", "reports"}


def test_policy_transfer_threshold_reaches_the_evaluator(tmp_path):
    run_config = {**SMALL_RUN, "policy": {**SMALL_RUN["policy"], "tau_wt": 0.3}}
    search = PairScout(run_config, output_dir=str(tmp_path))._build_search()
    assert search.policy.tau_wt == 0.3
    assert search.evaluator.tau_wt == 0.3
