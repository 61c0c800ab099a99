"""
Tests for parameter initialisation and the block-set containers.
"""

import numpy as np
import pytest

from structinfer.exceptions import ConfigurationError, DimensionMismatchError, InvalidArgumentError
from structinfer.models import Dims
from structinfer.params import (
    BIAS_BLOCKS,
    BLOCK_NAMES,
    block_shapes,
    empty_block_set,
    init_params,
)


def test_tied_parameter_count(dims):
    params = init_params(dims, T=3, mode="tied", gated=True, seed=0)
    assert len(params.blocks) == 1
    assert params.num_parameters() == 336
    assert params.steps_supported is None


def test_untied_has_one_block_set_per_step(dims):
    params = init_params(dims, T=3, mode="untied", gated=False, seed=0)
    assert len(params.blocks) == 3
    assert params.num_parameters() == 3 * 336
    assert params.steps_supported == 3
    assert params.block_for_step(2) is params.blocks[1]


def test_seed_determines_every_entry(dims):
    a = init_params(dims, T=2, mode="untied", gated=True, seed=42)
    b = init_params(dims, T=2, mode="untied", gated=True, seed=42)
    c = init_params(dims, T=2, mode="untied", gated=True, seed=43)
    assert a.equals(b)
    assert not a.equals(c)


def test_biases_start_at_zero_and_weights_do_not(dims):
    params = init_params(dims, T=1, mode="tied", gated=True, seed=1)
    for name, arr in params.blocks[0].arrays():
        if name in BIAS_BLOCKS:
            assert not np.any(arr)
        else:
            assert np.any(arr), name


def test_block_shapes_follow_dims():
    shapes = block_shapes(Dims(A=3, S=2))
    assert list(shapes) == list(BLOCK_NAMES)
    assert shapes["W_sa"] == (3, 2)
    assert shapes["W_hc1"] == (2, 5)
    assert shapes["W_hc2"] == (3, 8)
    assert shapes["g_pp"] == (12,)
    assert shapes["g_sp"] == (11,)
    assert shapes["g_ps"] == (10,)
    assert shapes["g_ps_bias"] == ()


def test_untied_rejects_longer_runs(dims):
    params = init_params(dims, T=2, mode="untied", gated=True, seed=0)
    params.check(2)
    with pytest.raises(ConfigurationError):
        params.check(3)
    with pytest.raises(ConfigurationError):
        params.block_for_step(3)
    with pytest.raises(InvalidArgumentError):
        params.block_for_step(0)


def test_tied_serves_any_step(dims):
    params = init_params(dims, T=1, mode="tied", gated=True, seed=0)
    params.check(50)
    assert params.block_for_step(50) is params.blocks[0]


def test_check_catches_bad_shapes_and_values(dims):
    params = init_params(dims, T=1, mode="tied", gated=True, seed=0)
    wrong = params.with_blocks([empty_block_set(Dims(A=4, S=4))])
    with pytest.raises(DimensionMismatchError):
        wrong.check()

    broken = params.copy()
    broken.blocks[0].W_aa[0, 0] = np.nan
    with pytest.raises(ConfigurationError):
        broken.check()


def test_copy_is_independent(dims):
    params = init_params(dims, T=1, mode="tied", gated=True, seed=0)
    clone = params.copy()
    clone.blocks[0].b_pp[:] = 5.0
    assert not np.any(params.blocks[0].b_pp)
    assert params.zeros_like().num_parameters() == params.num_parameters()


def test_scalar_gate_biases_survive_arithmetic(gated_params):
    blocks = gated_params.blocks[0]
    halved = blocks.map(lambda _, arr: arr / 2.0)
    combined = blocks.zip_map(halved, lambda _, a, b: a - b)
    for name in ("g_pp_bias", "g_sp_bias", "g_ps_bias"):
        assert isinstance(getattr(combined, name), np.ndarray)
        assert getattr(combined, name).shape == ()
        assert getattr(combined, name).dtype == np.float64
