"""
Learnable parameters of the inference machine.

A :class:`ParamBlockSet` holds every weight block used by one inference step: the message
maps, the two prediction layers and the three directional gates. Tied models reuse a single
block set at every step; untied models carry one block set per step.
"""

import logging
from collections import OrderedDict
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .exceptions import ConfigurationError, DimensionMismatchError, InvalidArgumentError
from .models import Dims, WeightMode

logger = logging.getLogger(__name__)

MESSAGE_BLOCKS = (
    "W_xm_p",
    "W_cm_p",
    "W_aa",
    "W_sa",
    "b_pp",
    "b_ps",
    "W_xm_s",
    "W_cm_s",
    "W_as",
    "b_sp",
)
PREDICTION_BLOCKS = ("W_hc1", "b_hc1", "W_hc2", "b_hc2")
GATE_BLOCKS = ("g_pp", "g_pp_bias", "g_sp", "g_sp_bias", "g_ps", "g_ps_bias")
BLOCK_NAMES = MESSAGE_BLOCKS + PREDICTION_BLOCKS + GATE_BLOCKS
BIAS_BLOCKS = frozenset(
    {"b_pp", "b_ps", "b_sp", "b_hc1", "b_hc2", "g_pp_bias", "g_sp_bias", "g_ps_bias"}
)


def block_shapes(dims: Dims) -> "OrderedDict[str, Tuple[int, ...]]":
    """Shape of every block for the given dimensions, in canonical order."""
    A, S = dims.A, dims.S
    return OrderedDict(
        [
            ("W_xm_p", (A, A)),
            ("W_cm_p", (A, A)),
            ("W_aa", (A, A)),
            ("W_sa", (A, S)),
            ("b_pp", (A,)),
            ("b_ps", (A,)),
            ("W_xm_s", (S, S)),
            ("W_cm_s", (S, S)),
            ("W_as", (S, A)),
            ("b_sp", (S,)),
            ("W_hc1", (S, S + A)),
            ("b_hc1", (S,)),
            ("W_hc2", (A, 2 * A + S)),
            ("b_hc2", (A,)),
            ("g_pp", (4 * A,)),
            ("g_pp_bias", ()),
            ("g_sp", (3 * A + S,)),
            ("g_sp_bias", ()),
            ("g_ps", (2 * S + 2 * A,)),
            ("g_ps_bias", ()),
        ]
    )


class ParamBlockSet(BaseModel):
    """All weight blocks used by one inference step."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    W_xm_p: np.ndarray
    W_cm_p: np.ndarray
    W_aa: np.ndarray
    W_sa: np.ndarray
    b_pp: np.ndarray
    b_ps: np.ndarray
    W_xm_s: np.ndarray
    W_cm_s: np.ndarray
    W_as: np.ndarray
    b_sp: np.ndarray
    W_hc1: np.ndarray
    b_hc1: np.ndarray
    W_hc2: np.ndarray
    b_hc2: np.ndarray
    g_pp: np.ndarray
    g_pp_bias: np.ndarray
    g_sp: np.ndarray
    g_sp_bias: np.ndarray
    g_ps: np.ndarray
    g_ps_bias: np.ndarray

    @field_validator("*", mode="before")
    @classmethod
    def _as_float_array(cls, value: Any) -> np.ndarray:
        # arithmetic on 0-d blocks yields numpy scalars
        return np.asarray(value, dtype=np.float64)

    def arrays(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in BLOCK_NAMES:
            yield name, getattr(self, name)

    def map(self, fn: Callable[[str, np.ndarray], np.ndarray]) -> "ParamBlockSet":
        return ParamBlockSet(**{name: fn(name, arr) for name, arr in self.arrays()})

    def zip_map(
        self, other: "ParamBlockSet", fn: Callable[[str, np.ndarray, np.ndarray], np.ndarray]
    ) -> "ParamBlockSet":
        return ParamBlockSet(
            **{name: fn(name, arr, getattr(other, name)) for name, arr in self.arrays()}
        )

    def copy(self) -> "ParamBlockSet":
        return self.map(lambda _, arr: np.array(arr, dtype=np.float64, copy=True))

    def zeros_like(self) -> "ParamBlockSet":
        return self.map(lambda _, arr: np.zeros_like(arr, dtype=np.float64))

    def check_shapes(self, dims: Dims) -> None:
        """
        Raise if a block's shape disagrees with ``dims`` or holds a non-finite entry.

        Raises:
            DimensionMismatchError: On a shape mismatch
            ConfigurationError: On a NaN or infinite entry
        """
        for name, shape in block_shapes(dims).items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionMismatchError(
                    f"Block {name} has shape {arr.shape}, "
                    f"expected {shape} for A={dims.A}, S={dims.S}"
                )
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"Block {name} contains non-finite entries")


class ModelParams(BaseModel):
    """
    Full parameter set: one block set (tied) or one per inference step (untied).

    The same structure doubles as the gradient container.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dims: Dims
    mode: WeightMode
    gated: bool
    blocks: List[ParamBlockSet]

    @property
    def steps_supported(self) -> Optional[int]:
        """Largest T this parameter set can run, or None if any T works (tied)."""
        return None if self.mode == "tied" else len(self.blocks)

    def block_for_step(self, t: int) -> ParamBlockSet:
        """Block set used at inference step ``t`` (1-based)."""
        if t < 1:
            raise InvalidArgumentError(f"Steps are numbered from 1, got {t}")
        if self.mode == "tied":
            return self.blocks[0]
        if t > len(self.blocks):
            raise ConfigurationError(
                f"untied checkpoint supports T={len(self.blocks)}, requested step {t}"
            )
        return self.blocks[t - 1]

    def iter_arrays(self) -> Iterator[Tuple[int, str, np.ndarray]]:
        """Yield ``(block_set_index, block_name, array)`` in canonical order."""
        for k, block in enumerate(self.blocks):
            for name, arr in block.arrays():
                yield k, name, arr

    def num_parameters(self) -> int:
        return sum(int(arr.size) for _, _, arr in self.iter_arrays())

    def with_blocks(self, blocks: List[ParamBlockSet]) -> "ModelParams":
        return ModelParams(dims=self.dims, mode=self.mode, gated=self.gated, blocks=blocks)

    def copy(self) -> "ModelParams":
        return self.with_blocks([b.copy() for b in self.blocks])

    def zeros_like(self) -> "ModelParams":
        return self.with_blocks([b.zeros_like() for b in self.blocks])

    def check(self, T: Optional[int] = None) -> None:
        """Validate shapes, finiteness and (untied) the block count against ``T``."""
        if not self.blocks:
            raise ConfigurationError("A parameter set needs at least one block set")
        if self.mode == "tied" and len(self.blocks) != 1:
            raise ConfigurationError(
                f"Tied parameters carry exactly one block set, got {len(self.blocks)}"
            )
        for block in self.blocks:
            block.check_shapes(self.dims)
        if T is not None and self.mode == "untied" and T > len(self.blocks):
            raise ConfigurationError(f"untied checkpoint supports T={len(self.blocks)}, got {T}")

    def equals(self, other: "ModelParams") -> bool:
        """Exact (bitwise value) equality of structure and every entry."""
        if (self.dims, self.mode, self.gated, len(self.blocks)) != (
            other.dims,
            other.mode,
            other.gated,
            len(other.blocks),
        ):
            return False
        return all(
            np.array_equal(a, b)
            for (_, _, a), (_, _, b) in zip(self.iter_arrays(), other.iter_arrays())
        )


Gradients = ModelParams


def _glorot_bound(shape: Tuple[int, ...]) -> float:
    # row vectors are treated as 1 x n matrices
    if len(shape) == 1:
        fan_out, fan_in = 1, shape[0]
    else:
        fan_out, fan_in = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_block_set(dims: Dims, rng: np.random.Generator) -> ParamBlockSet:
    """Draw one block set: uniform fan-based weights, zero biases."""
    values: Dict[str, np.ndarray] = {}
    for name, shape in block_shapes(dims).items():
        if name in BIAS_BLOCKS:
            values[name] = np.zeros(shape, dtype=np.float64)
        else:
            bound = _glorot_bound(shape)
            values[name] = rng.uniform(-bound, bound, size=shape).astype(np.float64)
    return ParamBlockSet(**values)


def init_params(dims: Dims, T: int, mode: WeightMode, gated: bool, seed: int) -> ModelParams:
    """
    Initialize a parameter set.

    Args:
        dims: Problem dimensions
        T: Number of inference steps (block sets drawn in untied mode)
        mode: ``"tied"`` or ``"untied"``
        gated: Whether the model imposes gates
        seed: Seed that fully determines every entry

    Returns:
        Freshly drawn parameters
    """
    if T < 1:
        raise InvalidArgumentError(f"T must be at least 1, got {T}")
    rng = np.random.default_rng(seed)
    count = 1 if mode == "tied" else T
    blocks = [init_block_set(dims, rng) for _ in range(count)]
    params = ModelParams(dims=dims, mode=mode, gated=gated, blocks=blocks)
    logger.debug(
        f"Initialized {mode} params (gated={gated}, T={T}, seed={seed}) "
        f"with {params.num_parameters()} entries"
    )
    return params


def empty_block_set(dims: Dims) -> ParamBlockSet:
    """Block set with every entry zero; handy for hand-set weights."""
    return ParamBlockSet(
        **{name: np.zeros(shape, dtype=np.float64) for name, shape in block_shapes(dims).items()}
    )


class Checkpoint(BaseModel):
    """Trained parameters with the optimizer state and run settings that produced them."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ModelParams
    T: int
    velocity: Optional[ModelParams] = None
    train_config: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    rng_state: Optional[Dict[str, Any]] = None
