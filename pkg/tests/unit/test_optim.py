"""
Tests for SGD with momentum.
"""

import numpy as np
import pytest

from structinfer.exceptions import DimensionMismatchError
from structinfer.models import Dims
from structinfer.optim import sgd_step
from structinfer.params import ModelParams, empty_block_set


def _filled(dims, value, mode="tied", count=1):
    filled = empty_block_set(dims).map(lambda _, arr: np.full_like(arr, value))
    blocks = [filled.copy() for _ in range(count)]
    return ModelParams(dims=dims, mode=mode, gated=True, blocks=blocks)


@pytest.fixture
def small_dims():
    return Dims(A=2, S=2)


def test_plain_step(small_dims):
    params, velocity = sgd_step(
        _filled(small_dims, 1.0), _filled(small_dims, 2.0), None, 0.1, 0.0
    )
    for _, _, arr in params.iter_arrays():
        np.testing.assert_allclose(arr, 0.8)
    for _, _, arr in velocity.iter_arrays():
        np.testing.assert_allclose(arr, -0.2)


def test_momentum_accumulates(small_dims):
    grads = _filled(small_dims, 2.0)
    params, velocity = sgd_step(_filled(small_dims, 1.0), grads, None, 0.1, 0.9)
    params, velocity = sgd_step(params, grads, velocity, 0.1, 0.9)
    for _, _, arr in params.iter_arrays():
        np.testing.assert_allclose(arr, 1.0 - 0.2 - 0.38)
    for _, _, arr in velocity.iter_arrays():
        np.testing.assert_allclose(arr, -0.38)


def test_inputs_are_not_modified(small_dims):
    params = _filled(small_dims, 1.0)
    grads = _filled(small_dims, 2.0)
    sgd_step(params, grads, None, 0.1, 0.5)
    for _, _, arr in params.iter_arrays():
        assert np.all(arr == 1.0)


def test_zero_learning_rate_leaves_parameters_untouched(small_dims):
    params = _filled(small_dims, 0.3)
    updated, _ = sgd_step(params, _filled(small_dims, 7.0), None, 0.0, 0.9)
    assert updated.equals(params)


def test_misaligned_gradients(small_dims):
    with pytest.raises(DimensionMismatchError):
        sgd_step(
            _filled(small_dims, 1.0),
            _filled(small_dims, 1.0, mode="untied", count=2),
            None,
            0.1,
            0.0,
        )


def test_step_on_initialised_gated_params(gated_params):
    grads = gated_params.with_blocks(
        [b.map(lambda _, arr: arr * 0.5) for b in gated_params.blocks]
    )
    params, velocity = sgd_step(gated_params, grads, None, 0.1, 0.9)
    assert params.blocks[0].g_pp_bias.shape == ()
    np.testing.assert_allclose(
        params.blocks[0].W_aa, gated_params.blocks[0].W_aa * 0.95, rtol=1e-12
    )
    assert velocity.blocks[0].g_ps_bias.shape == ()
