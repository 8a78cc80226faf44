#!/usr/bin/env python3
"""
Tests for performance scoring, Pareto fronts and the co-design search loop
"""

import numpy as np
import pytest

from accel_sim.simulator import AcceleratorSimulator
from config import CNN_SPACE_CONFIG
from design_space.accel_space import AccelSpace
from design_space.cnn_space import CnnSpace
from evaluators.synthetic import SyntheticEvaluator
from search.codesign_search import (BRANCHES, CodesignSearch, ConvergenceMonitor, SearchPolicy, TraceEntry,
                                    binomial_bound, branch_frequencies, choose_branch,
                                    expected_branch_probabilities)
from search.gobi import ConstraintSet, GobiConfig, InfeasibleConstraintsError
from search.pareto import OBJECTIVES, dominates, pareto_front
from search.performance import (COST_FIELDS, ConfigError, PerfRecord, PerfWeights, PerformanceScorer, performance,
                                performance_summary, score_breakdown)

HALF = PerfRecord(0.5, 0.5, 0.5, 0.5, 0.9)
ALLOWED_COSTS = (1.0, 0.68, 0.5, 0.34)


# ---------------------------------------------------------------- scoring

def test_performance_with_default_weights():
    assert performance(HALF, PerfWeights()) == pytest.approx(0.62, abs=1e-12)


def test_breakdown_sums_to_the_total():
    weights = PerfWeights(maxima={name: 2.0 for name in COST_FIELDS})
    breakdown = score_breakdown(HALF, weights)
    assert breakdown["latency"] == pytest.approx(0.2 * 0.75)
    assert breakdown["total_score"] == pytest.approx(sum(v for k, v in breakdown.items() if k != "total_score"))


def test_normalized_costs_are_clipped():
    record = PerfRecord(5.0, 0.0, 0.0, 0.0, 1.0)
    # latency above its maximum contributes nothing
    assert performance(record, PerfWeights()) == pytest.approx(0.1 + 0.2 + 0.2 + 0.3)


def test_weight_validation():
    with pytest.raises(ConfigError):
        PerfWeights(latency=0.5)
    with pytest.raises(ConfigError):
        PerfWeights(latency=-0.1, accuracy=0.6)
    with pytest.raises(ConfigError):
        PerfWeights(maxima={"latency": 1.0})
    with pytest.raises(ConfigError):
        PerfWeights.from_dict({"power": 0.1})
    assert PerfWeights.from_dict({"maxima": {name: 3.0 for name in COST_FIELDS}}).maxima["area"] == 3.0


def test_record_validation():
    with pytest.raises(ConfigError):
        PerfRecord(-1.0, 1.0, 1.0, 1.0, 0.5)
    with pytest.raises(ConfigError):
        PerfRecord(float("nan"), 1.0, 1.0, 1.0, 0.5)
    with pytest.raises(ConfigError):
        PerfRecord(1.0, 1.0, 1.0, 1.0, 1.5)
    assert HALF.edp == pytest.approx(0.5)
    assert HALF.to_row()["e_dyn_mJ"] == 0.5


def test_scorer_tracks_running_maxima_until_frozen():
    scorer = PerformanceScorer(PerfWeights())
    scorer.observe(PerfRecord(2.0, 10.0, 1.0, 0.1, 0.5))
    scorer.observe(PerfRecord(4.0, 5.0, 0.5, 0.2, 0.5))
    assert scorer.weights.maxima == {"latency": 4.0, "area": 10.0, "dynamic_energy": 1.0, "leakage_energy": 0.2}
    scorer.freeze()
    scorer.observe(PerfRecord(100.0, 100.0, 100.0, 100.0, 0.5))
    assert scorer.weights.maxima["latency"] == 4.0
    fixed = PerformanceScorer(PerfWeights(), fixed_maxima=True)
    fixed.observe(PerfRecord(100.0, 100.0, 100.0, 100.0, 0.5))
    assert fixed.weights.maxima["latency"] == 1.0


def test_performance_summary():
    records = [HALF, PerfRecord(0.2, 0.4, 0.1, 0.1, 0.7)]
    summary = performance_summary(records, [0.62, 0.7], ["RRAM", "RRAM"])
    assert summary["total_pairs"] == 2
    assert summary["best_performance"] == 0.7
    assert summary["min_latency_ms"] == 0.2
    assert summary["mem_type_distribution"] == {"RRAM": 2}
    assert performance_summary([], [])["total_pairs"] == 0


# ----------------------------------------------------------------- Pareto

def brute_force_front(records, objective):
    return [r for r in records if not any(dominates(o, r, objective) for o in records)]


@pytest.mark.parametrize("objective", ["area", "energy", "latency", "edp"])
def test_pareto_front_matches_brute_force(objective):
    rng = np.random.default_rng(11)
    records = [PerfRecord(*rng.uniform(0.1, 10.0, 4), float(rng.uniform(0.3, 0.95))) for _ in range(200)]
    front = pareto_front(records, objective)
    assert {id(r) for r in front} == {id(r) for r in brute_force_front(records, objective)}
    costs = [OBJECTIVES[objective](r) for r in front]
    assert costs == sorted(costs)


def test_pareto_front_keeps_identical_points():
    a = PerfRecord(1.0, 1.0, 1.0, 1.0, 0.9)
    b = PerfRecord(1.0, 1.0, 1.0, 1.0, 0.9)
    dominated = PerfRecord(2.0, 2.0, 2.0, 2.0, 0.8)
    cheap = PerfRecord(0.5, 0.5, 0.5, 0.5, 0.5)
    front = pareto_front([a, dominated, b, cheap], "latency")
    assert [id(r) for r in front] == [id(cheap), id(a), id(b)]
    assert pareto_front([], "edp") == []
    with pytest.raises(ConfigError):
        pareto_front([a], "power")


def test_pareto_front_over_arbitrary_items():
    rows = [{"name": "x", "record": HALF}, {"name": "y", "record": PerfRecord(0.4, 0.5, 0.5, 0.5, 0.95)}]
    assert [row["name"] for row in pareto_front(rows, "latency", record=lambda row: row["record"])] == ["y"]


# ----------------------------------------------------------------- policy

def test_policy_validation():
    with pytest.raises(ConfigError):
        SearchPolicy(alpha_p=0.6, beta_p=0.5)
    with pytest.raises(ConfigError):
        SearchPolicy(tau_wt=1.5)
    with pytest.raises(ConfigError):
        SearchPolicy(stack_schedule=[4, 3, 1])
    with pytest.raises(ConfigError):
        SearchPolicy(convergence_patience=0)
    with pytest.raises(ConfigError):
        SearchPolicy(workers=0)
    with pytest.raises(ConfigError):
        SearchPolicy.from_dict({"gamma_p": 0.1})
    assert SearchPolicy.from_dict({"budget": 7}).budget == 7


def test_branch_choice_boundaries():
    policy = SearchPolicy(alpha_p=0.1, beta_p=0.2)
    assert choose_branch(0.0, policy) == "gobi"
    assert choose_branch(0.69, policy) == "gobi"
    assert choose_branch(0.71, policy) == "uncertainty"
    assert choose_branch(0.81, policy) == "diversity"


def test_branch_frequencies_match_the_policy():
    policy = SearchPolicy(alpha_p=0.1, beta_p=0.1)
    n = 20_000
    observed = branch_frequencies(policy, n, seed=5)
    expected = expected_branch_probabilities(policy)
    for branch in BRANCHES:
        assert abs(observed[branch] - expected[branch]) <= binomial_bound(expected[branch], n)


def test_convergence_monitor():
    monitor = ConvergenceMonitor(tol=1e-3, patience=2)
    assert not monitor.update(0.5)
    assert not monitor.update(0.5001)
    assert monitor.update(0.5002)
    assert not monitor.update(0.6)
    monitor.reset()
    assert monitor.history == [] and monitor.stable == 0


# ----------------------------------------------------------------- search

@pytest.fixture(scope="module")
def spaces():
    cnn_space = CnnSpace({**CNN_SPACE_CONFIG, "depth_cap": 2, "stack_schedule": [1], "level_size_cap": 8}, seed=0)
    accel_space = AccelSpace(p_ib=[1], p_if=[16], p_ix=[1, 2, 4], p_iy=[1, 2], p_of=[1, 2], p_k=[3], batch=[1],
                             act_buf_mb=[8], wgt_buf_mb=[8], mask_buf_mb=[1], mem_types=["HBM"])
    evaluator = SyntheticEvaluator.seeded(accel_space, cnn_space.level_graphs(1), seed=0, samples=100)
    return cnn_space, accel_space, evaluator


def make_search(spaces, evaluator=None, **overrides) -> CodesignSearch:
    cnn_space, accel_space, synthetic = spaces
    policy = {"budget": 16, "initial_corpus": 5, "stack_schedule": [1], "candidate_pool": 16,
              "convergence_patience": 100, "validation_repeats": 1}
    policy.update(overrides.pop("policy", {}))
    return CodesignSearch(
        cnn_space, accel_space, AcceleratorSimulator(), evaluator or synthetic, SearchPolicy(**policy),
        surrogate_config={"branch_widths": [8], "head_widths": [8], "epochs": 20, "mc_samples": 4},
        gobi_config=GobiConfig(max_steps=5, restarts=2),
        embedding_config={"dimension": 2, "epochs": 50},
        **overrides)


class FailingEvaluator:
    def evaluate(self, *args, **kwargs):
        raise RuntimeError("oracle offline")


def test_budget_run_evaluates_distinct_pairs(spaces):
    seen = []
    result = make_search(spaces, on_evaluation=seen.append).run()
    assert result.status == "budget-exhausted"
    assert result.exit_code == 2
    assert len(result.trace) == 16 == len(seen)
    pairs = [(e.graph.digest, e.config) for e in result.trace]
    assert len(set(pairs)) == len(pairs)
    assert [e.branch for e in result.trace[:5]] == ["initial"] * 5
    assert {e.branch for e in result.trace[5:]} <= set(BRANCHES)
    assert 0.0 < result.best_performance <= 1.0
    assert result.best_graph is not None


def test_training_cost_audit(spaces):
    result = make_search(spaces).run()
    assert result.total_cost == pytest.approx(sum(e.cost for e in result.trace))
    for entry in result.trace:
        if entry.ok:
            assert any(entry.cost == pytest.approx(c) for c in ALLOWED_COSTS)
            assert entry.transfer == (entry.cost in (pytest.approx(0.68), pytest.approx(0.34)))
        else:
            assert entry.cost == 0.0
    summary = result.summary()
    assert summary["evaluations"] == len(result.trace)
    assert summary["total_cost"] == pytest.approx(result.total_cost)


def _transfer_run(spaces, tau_wt: float):
    cnn_space, accel_space, _ = spaces
    evaluator = SyntheticEvaluator.seeded(accel_space, cnn_space.level_graphs(1), seed=0, samples=100, tau_wt=tau_wt)
    return make_search(spaces, evaluator, policy={"tau_wt": tau_wt}).run()


def test_transfer_threshold_gates_the_discount(spaces):
    loose, strict = _transfer_run(spaces, 0.0), _transfer_run(spaces, 1.0)
    assert [e.overlap for e in loose.trace] == [e.overlap for e in strict.trace]
    assert any(e.overlap is not None for e in loose.trace)
    for entry in loose.trace:
        assert entry.transfer == (entry.overlap is not None)
    for entry in strict.trace:
        assert entry.transfer == (entry.overlap is not None and entry.overlap >= 1.0)
    assert sum(e.transfer for e in loose.trace) > sum(e.transfer for e in strict.trace)
    assert loose.total_cost < strict.total_cost
    assert loose.trace[-1].to_row()["overlap"] == loose.trace[-1].overlap


def test_evaluator_and_policy_must_share_the_transfer_threshold(spaces):
    with pytest.raises(ConfigError):
        make_search(spaces, policy={"tau_wt": 0.3})


def test_pure_gobi_policy(spaces):
    result = make_search(spaces, policy={"alpha_p": 0.0, "beta_p": 0.0}).run()
    assert [e.branch for e in result.trace[5:]] == ["gobi"] * 11


def test_runs_are_reproducible(spaces):
    first = make_search(spaces, seed=3).run()
    second = make_search(spaces, seed=3).run()
    assert [(e.graph.digest, e.config, e.branch) for e in first.trace] == \
           [(e.graph.digest, e.config, e.branch) for e in second.trace]


def test_fix_accel_mode_exhausts_the_cnn_space(spaces):
    _, accel_space, _ = spaces
    fixed = next(accel_space.iter_configs())
    result = make_search(spaces, mode="fix-accel", fixed_config=fixed).run()
    assert {e.config for e in result.trace} == {fixed}
    assert result.status == "space-exhausted"
    assert result.exit_code == 0
    assert len(result.trace) == len({e.graph.digest for e in result.trace})


def test_fix_cnn_mode_keeps_one_graph(spaces):
    cnn_space, _, _ = spaces
    fixed = cnn_space.level_graphs(1)[0]
    result = make_search(spaces, mode="fix-cnn", fixed_graph=fixed).run()
    assert {e.graph.digest for e in result.trace} == {fixed.digest}
    assert len({e.config for e in result.trace}) == len(result.trace)


def test_search_converges_and_validates_the_best_pair(spaces):
    weights = PerfWeights(maxima={name: 1e6 for name in COST_FIELDS})
    result = make_search(spaces, weights=weights, fixed_maxima=True,
                         policy={"budget": 40, "convergence_patience": 2, "validation_repeats": 2}).run()
    assert result.status == "converged"
    validation = [e for e in result.trace if e.branch == "validation"]
    assert len(validation) == 2
    assert all(e.graph == result.best_graph and e.config == result.best_config for e in validation)
    assert result.validation_mean is not None


def test_parallel_workers_complete_the_budget(spaces):
    result = make_search(spaces, policy={"workers": 2}).run()
    assert len(result.trace) == 16
    assert [e.iteration for e in result.trace] == list(range(16))


def test_failed_evaluations_are_recorded(spaces):
    result = make_search(spaces, evaluator=FailingEvaluator(), policy={"budget": 2, "initial_corpus": 2}).run()
    assert [e.status for e in result.trace] == ["failed", "failed"]
    assert result.best_graph is None
    assert result.total_cost == 0.0
    row = result.trace[0].to_row()
    assert row["accuracy"] is None and "oracle offline" in row["note"]


def test_infeasible_constraints_and_bad_modes(spaces):
    never = ConstraintSet(accel=[lambda c: False], description=["never"])
    with pytest.raises(InfeasibleConstraintsError):
        make_search(spaces, constraints=never).run()
    with pytest.raises(ConfigError):
        make_search(spaces, mode="fix-everything")


def test_trace_rows_carry_the_record(spaces):
    result = make_search(spaces, policy={"budget": 3, "initial_corpus": 3}).run()
    entry = next(e for e in result.trace if e.ok)
    row = entry.to_row()
    assert isinstance(entry, TraceEntry)
    assert row["digest"] == entry.graph.digest
    assert row["accel"].endswith("32,1,4")
    assert row["accuracy"] == entry.record.accuracy


def test_converged_levels_advance_to_finer_stacks(spaces):
    weights = PerfWeights(maxima={name: 1e6 for name in COST_FIELDS})
    search = make_search(spaces, weights=weights, fixed_maxima=True,
                         policy={"budget": 60, "stack_schedule": [2, 1], "convergence_patience": 2})
    result = search.run()
    levels = {e.level for e in result.trace}
    assert levels == {1, 2}
    assert all(e.stack_size == 2 for e in result.trace if e.level == 1)
    assert all(e.stack_size == 1 for e in result.trace if e.level == 2)
    assert search.scorer.frozen
    assert spaces[0].config["stack_schedule"] == [1]
