#!/usr/bin/env python3
"""
Tests for the accelerator simulator and fixed-point rounding
"""

import dataclasses
import json
import logging
import math
import os

import numpy as np
import pytest

from accel_sim.fixed_point import FixedPointSpec, StochasticRounder, stochastic_round
from accel_sim.simulator import (AcceleratorSimulator, CapacityError, ConstantsError, LayerShape, SimulationError,
                                 UnmappableLayerError, area, area_breakdown, constants_from_dict, load_constants,
                                 simulate)
from config import DATA_DIR, SIMULATOR_CONFIG
from design_space.accel_space import get_preset
from design_space.cnn_space import load_graph


@pytest.fixture(scope="module")
def constants():
    return load_constants()


@pytest.fixture(scope="module")
def simulator(constants):
    return AcceleratorSimulator(constants)


@pytest.fixture(scope="module")
def toy_cnn():
    return load_graph(os.path.join(DATA_DIR, "toy_cnn.json"))


@pytest.fixture(scope="module")
def spring():
    return get_preset("SPRING").config


def test_constants_checksum_is_verified(constants):
    assert len(constants.checksum) == 64
    assert constants.clock_hz == 700_000_000


def test_tampered_constants_fail_the_checksum(tmp_path):
    source = SIMULATOR_CONFIG["constants_path"]
    with open(source, "r") as f:
        data = json.load(f)
    data["energy_pj"]["multiply"] = 0.3
    path = tmp_path / "cost_constants.json"
    path.write_text(json.dumps(data))
    with open(source + ".sha256", "r") as f:
        (tmp_path / "cost_constants.json.sha256").write_text(f.read())
    with pytest.raises(ConstantsError):
        load_constants(str(path))


def test_constants_are_validated():
    with open(SIMULATOR_CONFIG["constants_path"], "r") as f:
        data = json.load(f)
    missing = {k: v for k, v in data.items() if k != "memory"}
    with pytest.raises(ConstantsError):
        constants_from_dict(missing)
    negative = json.loads(json.dumps(data))
    negative["area_mm2"]["controller"] = -1.0
    with pytest.raises(ConstantsError):
        constants_from_dict(negative)
    with pytest.raises(ConstantsError):
        constants_from_dict({**data, "clock_hz": 0})
    with pytest.raises(ConstantsError):
        load_constants("/nonexistent/cost_constants.json")


def test_area_of_the_reference_design(spring, constants):
    parts = area_breakdown(spring, constants)
    assert parts["pe_array"] == pytest.approx(64 * (0.15 + 72 * (0.002 + 16 * 0.0008)))
    assert area(spring, constants) == pytest.approx(150.1984)


def test_lowering_the_toy_cnn(simulator, toy_cnn):
    layers = simulator.lower(toy_cnn)
    assert [layer.kind for layer in layers] == ["conv", "pool", "conv", "pool", "dense", "dense", "dense"]
    first_dense = layers[4]
    assert first_dense.n_if == 16 * 8 * 8
    assert first_dense.n_of == 120
    assert layers[0].macs == 1 * 3 * 32 * 32 * 8 * 5 * 5


def test_simulation_is_deterministic_and_finite(simulator, toy_cnn, spring):
    first = simulator.simulate(toy_cnn, spring)
    second = simulator.simulate(toy_cnn, spring)
    assert first == second
    for value in (first.latency_ms, first.area_mm2, first.dynamic_energy_mj, first.leakage_energy_mj):
        assert math.isfinite(value) and value > 0.0
    assert first.edp == pytest.approx((first.dynamic_energy_mj + first.leakage_energy_mj) * first.latency_ms)
    assert set(first.to_row()) == {"latency_ms", "area_mm2", "e_dyn_mJ", "e_leak_mJ"}
    assert simulate(toy_cnn, spring).latency_ms == pytest.approx(first.latency_ms)


def test_memory_technology_ordering(simulator, toy_cnn, spring):
    rram = spring
    hbm = dataclasses.replace(spring, mem_type="HBM", mem_config=(32, 1, 4))
    dram = dataclasses.replace(spring, mem_type="DRAM", mem_config=(16, 2, 2))
    results = [simulator.simulate(toy_cnn, c) for c in (rram, hbm, dram)]
    energies = [r.dynamic_energy_mj for r in results]
    latencies = [r.latency_ms for r in results]
    assert energies[0] < energies[1] < energies[2]
    assert latencies[0] <= latencies[1] <= latencies[2]


def test_more_processing_elements_never_slow_down(simulator, toy_cnn, spring):
    small = dataclasses.replace(spring, p_ix=1, p_iy=1)
    big = spring
    assert simulator.simulate(toy_cnn, big).latency_ms <= simulator.simulate(toy_cnn, small).latency_ms
    assert simulator.simulate(toy_cnn, big).area_mm2 > simulator.simulate(toy_cnn, small).area_mm2


def test_pipeline_depth_follows_the_used_multipliers(simulator, spring):
    narrow = simulator.simulate_layer(LayerShape("dense", 1, 1, 1, 1, 4, 1, 1), spring)
    assert narrow.mac_cycles == 2
    wide = simulator.simulate_layer(LayerShape("dense", 1, 16, 1, 1, 4, 1, 1), spring)
    assert wide.mac_cycles == math.ceil(math.log2(16)) + 2


def test_sparsity_masks_reduce_effective_work(constants, toy_cnn, spring):
    dense_sim = AcceleratorSimulator(constants, binary_mask=False)
    sparse_sim = AcceleratorSimulator(constants, binary_mask=True)
    dense = dense_sim.simulate(toy_cnn, spring)
    sparse = sparse_sim.simulate(toy_cnn, spring)
    assert sum(l.effective_macs for l in sparse.layers) < sum(l.effective_macs for l in dense.layers)
    assert all(l.mask_bytes == 0.0 for l in dense.layers)


def test_capacity_and_mapping_errors(simulator, spring):
    with pytest.raises(CapacityError):
        simulator.simulate_layer(LayerShape("conv", 1, 16, 4, 4, 8, 3, 3, stride=1000), spring)
    with pytest.raises(UnmappableLayerError):
        simulator.simulate_layer(LayerShape("lstm", 1, 1, 1, 1, 1, 1, 1), spring)
    with pytest.raises(SimulationError):
        LayerShape("conv", 1, 0, 4, 4, 8, 3, 3)
    with pytest.raises(SimulationError):
        LayerShape("conv", 1, 1, 4, 4, 8, 3, 3, sparsity_act=1.5)


def test_fixed_point_format():
    spec = FixedPointSpec()
    assert spec.word_bits == 20
    assert spec.epsilon == 2.0 ** -16
    assert spec.min_value == -8.0
    assert spec.max_value == 8.0 - spec.epsilon


def test_grid_values_are_kept_and_overflow_saturates():
    spec = FixedPointSpec()
    rounder = StochasticRounder(spec, seed=0)
    exact = 3 * spec.epsilon
    assert rounder.round(exact) == exact
    assert rounder.round(100.0) == spec.max_value
    assert rounder.round(-100.0) == spec.min_value
    assert rounder.overflow_count == 2


def test_stochastic_rounding_is_unbiased_and_seeded():
    spec = FixedPointSpec()
    x = 1.0 + 0.3 * spec.epsilon
    draws = 100_000
    rounded = StochasticRounder(spec, seed=4).round_array(np.full(draws, x))
    assert set(np.unique(rounded)) <= {1.0, 1.0 + spec.epsilon}
    assert np.mean(rounded == 1.0) == pytest.approx(0.7, abs=0.005)
    assert abs(rounded.mean() - x) < 3 * (spec.epsilon / 2) / math.sqrt(draws)
    assert stochastic_round(x, spec, 9) == stochastic_round(x, spec, 9)
    assert stochastic_round(x, spec, np.random.default_rng(1)) in (1.0, 1.0 + spec.epsilon)


def test_stochastic_round_reports_saturation(caplog):
    spec = FixedPointSpec()
    with caplog.at_level(logging.WARNING, logger="accel_sim.fixed_point"):
        assert stochastic_round(100.0, spec) == spec.max_value
    assert "1 overflow" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="accel_sim.fixed_point"):
        stochastic_round(1.0, spec)
    assert caplog.text == ""
