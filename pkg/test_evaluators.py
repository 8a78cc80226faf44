#!/usr/bin/env python3
"""
Tests for the accuracy oracles and training-cost rules
"""

import numpy as np
import pytest

from config import CNN_SPACE_CONFIG
from design_space.accel_space import AccelSpace
from design_space.cnn_space import CnnSpace
from evaluators.base import EvaluatorError, MissingEntryError, Recipe, charge_cost, sample_recipe
from evaluators.synthetic import SyntheticEvaluator, SyntheticLandscape
from evaluators.tabular import TabularBenchmark, TabularEvaluator, TabularFormatError, load_tabular, save_tabular

RECIPE = Recipe(1e-3, 0.9, 0.99, 1e-4)


@pytest.fixture(scope="module")
def graphs():
    return CnnSpace({**CNN_SPACE_CONFIG, "level_size_cap": 20}, seed=0).level_graphs(1)


@pytest.fixture(scope="module")
def evaluator(graphs):
    return SyntheticEvaluator.seeded(AccelSpace(), graphs, seed=3)


def write_csv(path, text: str) -> str:
    path.write_text(text)
    return str(path)


def test_transfer_discount():
    charged = charge_cost(0.8, transfer_overlap=0.9, accuracy_floor=None)
    assert charged == {"cost": pytest.approx(0.68), "transfer": True, "early_stopped": False}
    assert charge_cost(0.8, 0.5, None)["cost"] == 1.0
    assert charge_cost(0.8, 0.8, None)["transfer"]


def test_early_stop_halves_the_cost():
    assert charge_cost(0.3, None, accuracy_floor=0.5) == {"cost": 0.5, "transfer": False, "early_stopped": True}
    assert charge_cost(0.3, 0.95, 0.5)["cost"] == pytest.approx(0.34)
    assert not charge_cost(0.7, None, 0.5)["early_stopped"]


def test_recipe_identity_and_learning_rate_coordinate():
    assert RECIPE.recipe_id == Recipe(1e-3, 0.9, 0.99, 1e-4).recipe_id
    assert RECIPE.recipe_id != Recipe(1e-3, 0.91, 0.99, 1e-4).recipe_id
    assert len(RECIPE.recipe_id) == 12
    assert Recipe(1e-5, 0.9, 0.99, 0.0).lr_coordinate() == pytest.approx(0.0)
    assert Recipe(1e-2, 0.9, 0.99, 0.0).lr_coordinate() == pytest.approx(1.0)
    assert Recipe(1.0, 0.9, 0.99, 0.0).lr_coordinate() == 1.0
    assert RECIPE.to_json()["recipe_id"] == RECIPE.recipe_id


def test_recipe_sampling_is_seeded_and_in_range():
    first = [sample_recipe(np.random.default_rng(4)) for _ in range(3)]
    assert first[0] == first[1] == first[2]
    rng = np.random.default_rng(0)
    for recipe in (sample_recipe(rng) for _ in range(100)):
        assert 1e-5 <= recipe.learning_rate <= 1e-2
        assert 0.8 <= recipe.beta1 <= 0.95
        assert 0.9 <= recipe.beta2 <= 0.999


def test_landscape_validation():
    with pytest.raises(EvaluatorError):
        SyntheticLandscape([[0.0, 0.0]], [1.0], [0.1])
    with pytest.raises(EvaluatorError):
        SyntheticLandscape([[0.0, 0.0]], [0.5, 0.5], [0.1])
    with pytest.raises(EvaluatorError):
        SyntheticLandscape.random(0, 4, bumps=2)


def test_landscape_is_bounded_and_peaks_at_the_main_bump():
    landscape = SyntheticLandscape.random(seed=1, dim=4)
    rng = np.random.default_rng(0)
    values = [landscape.base(x) for x in rng.random((200, 4))]
    assert all(0.0 <= v < 1.0 for v in values)
    assert landscape.base(landscape.global_center()) >= 0.95


def test_noise_is_deterministic_with_the_configured_spread():
    landscape = SyntheticLandscape([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]], [0.9, 0.5, 0.5], [0.1, 0.1, 0.1],
                                   noise_scale=0.01, seed=2)
    x = np.zeros(2)
    assert landscape.accuracy(x, RECIPE) == landscape.accuracy(x, RECIPE)
    middle_lr = 10 ** -3.5  # log coordinate 0.5, so the noise std equals noise_scale
    rng = np.random.default_rng(1)
    recipes = [Recipe(middle_lr, float(b), 0.99, 1e-4) for b in rng.uniform(0.8, 0.95, 2000)]
    assert landscape.noise_std(recipes[0]) == pytest.approx(0.01)
    deviations = np.array([landscape.accuracy(x, r) - landscape.base(x) for r in recipes])
    assert abs(deviations.mean()) < 1e-3
    assert deviations.std() == pytest.approx(0.01, rel=0.1)


def test_synthetic_evaluator_is_deterministic(evaluator, graphs):
    config = AccelSpace().sample(np.random.default_rng(0), 1)[0]
    first = evaluator.evaluate(graphs[0], config, RECIPE)
    assert first == evaluator.evaluate(graphs[0], config, RECIPE)
    assert 0.0 <= first.accuracy <= 1.0
    assert first.cost == 1.0 and not first.transfer
    assert first.recipe_id == RECIPE.recipe_id
    assert 0.0 <= evaluator.true_accuracy(graphs[0], config) < 1.0


def test_synthetic_evaluator_charges_transfer(evaluator, graphs):
    config = AccelSpace().sample(np.random.default_rng(1), 1)[0]
    evaluation = evaluator.evaluate(graphs[1], config, RECIPE, transfer_overlap=0.9)
    assert evaluation.transfer
    assert evaluation.cost == pytest.approx(0.68)


def test_seeded_landscapes_reach_high_accuracy(evaluator):
    assert evaluator.landscape.base(evaluator.landscape.global_center()) >= 0.95
    assert len(evaluator.landscape.centers) >= 3


def test_tabular_load_and_lookup(tmp_path):
    path = write_csv(tmp_path / "bench.csv", "digest,recipe_id,accuracy\nAB12,r1,0.9\nab12,r2,0.7\ncd34,r1,0.5\n")
    (tmp_path / "bench.json").write_text('{"dataset": "toy"}')
    benchmark = load_tabular(path)
    assert len(benchmark) == 2
    assert "ab12" in benchmark
    assert benchmark.mean_accuracy("ab12") == pytest.approx(0.8)
    assert benchmark.accuracy("ab12", "r2") == 0.7
    assert benchmark.metadata == {"dataset": "toy"}
    with pytest.raises(MissingEntryError):
        benchmark.accuracy("ab12", "r9")
    with pytest.raises(MissingEntryError):
        benchmark.accuracy("ffff")


@pytest.mark.parametrize("text, line", [
    ("digest,recipe,accuracy\nab,r1,0.5\n", 1),
    ("digest,recipe_id,accuracy\nab,r1,0.5\nab,r2,1.5\n", 3),
    ("digest,recipe_id,accuracy\nab,r1,0.5\nab,r1,0.6\n", 3),
    ("digest,recipe_id,accuracy\nab,r1,high\n", 2),
    ("digest,recipe_id,accuracy\n,r1,0.5\n", 2),
])
def test_tabular_format_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(TabularFormatError) as info:
        load_tabular(write_csv(tmp_path / "bad.csv", text))
    assert info.value.line == line


def test_tabular_rejects_empty_files(tmp_path):
    with pytest.raises(TabularFormatError):
        load_tabular(write_csv(tmp_path / "empty.csv", ""))
    with pytest.raises(TabularFormatError):
        load_tabular(write_csv(tmp_path / "header.csv", "digest,recipe_id,accuracy\n"))


def test_tabular_save_and_reload(tmp_path):
    benchmark = TabularBenchmark({"ab12": {"r1": 0.123456789, "r2": 0.5}}, {"source": "unit"})
    path = str(tmp_path / "saved.csv")
    save_tabular(benchmark, path)
    reloaded = load_tabular(path)
    assert reloaded.entries == benchmark.entries
    assert reloaded.metadata == benchmark.metadata


def test_tabular_evaluator_picks_a_stored_recipe(graphs):
    config = AccelSpace().sample(np.random.default_rng(2), 1)[0]
    digest = graphs[0].digest
    benchmark = TabularBenchmark({digest: {"a": 0.6, "b": 0.8}})
    evaluator = TabularEvaluator(benchmark)
    evaluation = evaluator.evaluate(graphs[0], config, RECIPE, transfer_overlap=0.95)
    assert evaluation.recipe_id in ("a", "b")
    assert evaluation.accuracy == benchmark.accuracy(digest, evaluation.recipe_id)
    assert evaluation.cost == pytest.approx(0.68)
    assert evaluation == evaluator.evaluate(graphs[0], config, RECIPE, transfer_overlap=0.95)
    with pytest.raises(MissingEntryError):
        evaluator.evaluate(graphs[1], config, RECIPE)


def test_seeded_evaluator_uses_the_given_transfer_threshold(graphs):
    config = AccelSpace().sample(np.random.default_rng(5), 1)[0]
    loose = SyntheticEvaluator.seeded(AccelSpace(), graphs, seed=3, tau_wt=0.3)
    strict = SyntheticEvaluator.seeded(AccelSpace(), graphs, seed=3)
    assert loose.tau_wt == 0.3
    assert loose.evaluate(graphs[0], config, RECIPE, transfer_overlap=0.5).transfer
    assert not strict.evaluate(graphs[0], config, RECIPE, transfer_overlap=0.5).transfer
