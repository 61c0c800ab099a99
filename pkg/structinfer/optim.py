import logging
from typing import Optional, Tuple

import numpy as np

from .exceptions import DimensionMismatchError
from .params import Gradients, ModelParams

logger = logging.getLogger(__name__)

Velocity = ModelParams


def _check_aligned(params: ModelParams, other: ModelParams, what: str) -> None:
    if len(params.blocks) != len(other.blocks):
        raise DimensionMismatchError(
            f"{what} has {len(other.blocks)} block sets, parameters have {len(params.blocks)}"
        )
    for (k, name, a), (_, _, b) in zip(params.iter_arrays(), other.iter_arrays()):
        if a.shape != b.shape:
            raise DimensionMismatchError(
                f"{what} block {k}.{name} has shape {b.shape}, expected {a.shape}"
            )


def sgd_step(
    params: ModelParams,
    grads: Gradients,
    velocity: Optional[Velocity],
    learning_rate: float,
    momentum: float,
) -> Tuple[ModelParams, Velocity]:
    """
    One step of SGD with classical momentum.

    ``velocity <- momentum * velocity - learning_rate * grads`` then
    ``params <- params + velocity``. Frozen blocks arrive with zero gradients, so only their
    velocity decays. Inputs are not modified.

    Args:
        params: Current parameters
        grads: Gradients shaped like ``params``
        velocity: Previous velocity, or None to start from zero
        learning_rate: Step size
        momentum: Momentum factor in ``[0, 1)``

    Returns:
        The updated parameters and velocity

    Raises:
        DimensionMismatchError: If the shapes do not align
    """
    _check_aligned(params, grads, "Gradient")
    if velocity is None:
        velocity = params.zeros_like()
    else:
        _check_aligned(params, velocity, "Velocity")

    new_velocity = velocity.with_blocks(
        [
            v.zip_map(g, lambda _, va, ga: momentum * va - learning_rate * ga)
            for v, g in zip(velocity.blocks, grads.blocks)
        ]
    )
    new_params = params.with_blocks(
        [
            p.zip_map(v, lambda _, pa, va: pa + va)
            for p, v in zip(params.blocks, new_velocity.blocks)
        ]
    )
    return new_params, new_velocity
