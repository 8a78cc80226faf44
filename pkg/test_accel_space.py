#!/usr/bin/env python3
"""
Tests for the accelerator design space and presets
"""

import numpy as np
import pytest

from design_space.accel_space import (EMBEDDING_SIZE, AcceleratorConfig, AccelSpace, UnknownPresetError,
                                      get_preset, load_presets)
from design_space.cnn_space import ParameterError

SPRING_LIKE = AcceleratorConfig(1, 16, 8, 8, 8, 3, 3, 1, 12, 24, 4, "RRAM", (16, 2, 2))


@pytest.fixture(scope="module")
def space():
    return AccelSpace()


@pytest.fixture(scope="module")
def small_space():
    return AccelSpace(p_ib=[1], p_if=[16], p_ix=[1, 2, 4], p_iy=[1, 2], p_of=[1], p_k=[3], batch=[1],
                      act_buf_mb=[8], wgt_buf_mb=[8], mask_buf_mb=[1], mem_types=["RRAM", "HBM"])


def test_default_cardinality(space):
    assert space.cardinality() == 228_433_920


def test_restricted_cardinality_matches_enumeration(small_space):
    configs = list(small_space.iter_configs())
    # 3 x 2 numeric combinations times 6 RRAM + 1 HBM memory configurations
    assert small_space.cardinality() == len(configs) == 42
    assert len(set(configs)) == len(configs)


def test_config_derived_counts():
    assert SPRING_LIKE.pe_count() == 64
    assert SPRING_LIKE.mac_units_per_pe() == 72
    assert SPRING_LIKE.multipliers_per_mac() == 16
    assert SPRING_LIKE.total_mac_units() == 64 * 72


def test_config_json_round_trip():
    data = SPRING_LIKE.to_json()
    assert data["mem_config"] == [16, 2, 2]
    assert AcceleratorConfig.from_json(data) == SPRING_LIKE
    del data["batch"]
    with pytest.raises(ParameterError):
        AcceleratorConfig.from_json(data)


def test_validate_rejects_out_of_space_values(space):
    space.validate(SPRING_LIKE)
    bad_kernel = AcceleratorConfig(1, 16, 8, 8, 8, 3, 5, 1, 12, 24, 4, "RRAM", (16, 2, 2))
    bad_value = AcceleratorConfig(1, 16, 8, 8, 8, 3, 3, 1, 11, 24, 4, "RRAM", (16, 2, 2))
    bad_memory = AcceleratorConfig(1, 16, 8, 8, 8, 3, 3, 1, 12, 24, 4, "HBM", (16, 2, 2))
    for config in (bad_kernel, bad_value, bad_memory):
        assert not space.is_valid(config)
        with pytest.raises(ParameterError):
            space.validate(config)


def test_encoding_lies_in_the_unit_cube(space):
    rng = np.random.default_rng(0)
    for config in space.sample(rng, 50):
        x = space.encode(config)
        assert x.shape == (EMBEDDING_SIZE,)
        assert np.all((x >= 0.0) & (x <= 1.0))
        assert space.decode(x) == (config, False)


def test_encoding_endpoints(space):
    x = space.encode(SPRING_LIKE)
    assert x[0] == 0.0  # p_ib at its minimum
    assert x[1] == 1.0  # p_if at its maximum
    assert x[2] == 1.0 and x[3] == 1.0
    assert x[11] == 0.0  # RRAM is the first memory type
    assert x[12] == 0.0


def test_decode_snaps_and_reports_clamping(space):
    x = space.encode(SPRING_LIKE)
    nudged = x + 0.01
    nudged[0] = -0.3
    config, clamped = space.decode(nudged)
    assert clamped
    assert config.p_ib == 1
    assert config.p_kx == config.p_ky
    with pytest.raises(ParameterError):
        space.decode(np.zeros(EMBEDDING_SIZE - 1))
    with pytest.raises(ParameterError):
        space.decode(np.full(EMBEDDING_SIZE, np.nan))


def test_sample_is_valid_and_seeded(space):
    first = space.sample(np.random.default_rng(3), 20)
    assert first == space.sample(np.random.default_rng(3), 20)
    assert all(space.is_valid(c) for c in first)


def test_nearest_configs_exhaustive_on_small_spaces(small_space):
    target = small_space.encode(list(small_space.iter_configs())[5])
    ranked = small_space.nearest_configs(target)
    assert len(ranked) == small_space.cardinality()
    assert ranked[0][1] == 0.0
    distances = [d for _, d in ranked]
    assert distances == sorted(distances)


def test_nearest_configs_local_pool_on_large_spaces(space):
    x = space.encode(SPRING_LIKE)
    ranked = space.nearest_configs(x, seed=0)
    assert ranked[0] == (SPRING_LIKE, 0.0)
    assert all(space.is_valid(c) for c, _ in ranked[:50])
    assert len(ranked) == len({c for c, _ in ranked})


def test_adjacent_moves_one_coordinate(space):
    moves = space.adjacent(SPRING_LIKE)
    assert SPRING_LIKE not in moves
    for move in moves:
        assert space.is_valid(move)
        changed = [f for f in ("p_ib", "p_if", "p_ix", "p_iy", "p_of", "p_kx", "batch", "act_buf_mb",
                               "wgt_buf_mb", "mask_buf_mb") if getattr(move, f) != getattr(SPRING_LIKE, f)]
        memory_changed = (move.mem_type, move.mem_config) != (SPRING_LIKE.mem_type, SPRING_LIKE.mem_config)
        assert len(changed) + int(memory_changed) == 1


def test_presets_load_and_lookup_is_case_insensitive(space):
    presets = load_presets()
    assert "SPRING" in presets
    assert get_preset("spring").config == presets["SPRING"].config
    for preset in presets.values():
        assert space.is_valid(preset.config)


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        get_preset("not-a-chip")
