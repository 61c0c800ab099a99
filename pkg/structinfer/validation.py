import logging

import numpy as np

from .exceptions import InstanceValidationError
from .models import Dims, FrameInstance

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-6


def _check_simplex(vector: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(vector)):
        raise InstanceValidationError(f"{what} contains non-finite entries")
    if np.any(vector < 0.0):
        raise InstanceValidationError(f"{what} has negative entries")
    total = float(np.sum(vector))
    if abs(total - 1.0) > SIMPLEX_TOLERANCE:
        raise InstanceValidationError(f"{what} is not a probability vector: sums to {total:.9g}")


def validate_instance(inst: FrameInstance, dims: Dims) -> None:
    """
    Check a frame against the problem dimensions.

    Args:
        inst: The frame to check
        dims: Expected dimensions

    Raises:
        InstanceValidationError: On a wrong vector length, a vector off the simplex (naming the
            row and its sum) or an out-of-range label
    """
    try:
        if inst.scene_unary.shape != (dims.S,):
            raise InstanceValidationError(
                f"scene_unary has length {inst.scene_unary.shape[0]}, expected S={dims.S}"
            )
        if inst.M < 1:
            raise InstanceValidationError("person_unaries must hold at least one person")
        if inst.person_unaries.shape[1] != dims.A:
            raise InstanceValidationError(
                f"person unaries have length {inst.person_unaries.shape[1]}, expected A={dims.A}"
            )
        _check_simplex(inst.scene_unary, "scene_unary")
        for i, row in enumerate(inst.person_unaries):
            _check_simplex(row, f"person_unaries[{i}]")

        if inst.scene_label is not None and not 0 <= inst.scene_label < dims.S:
            raise InstanceValidationError(
                f"scene_label {inst.scene_label} out of range [0, {dims.S})"
            )
        if inst.action_labels is not None:
            if inst.action_labels.shape != (inst.M,):
                raise InstanceValidationError(
                    f"action_labels has {inst.action_labels.shape[0]} entries for {inst.M} persons"
                )
            bad = np.flatnonzero((inst.action_labels < 0) | (inst.action_labels >= dims.A))
            if bad.size:
                i = int(bad[0])
                raise InstanceValidationError(
                    f"action_labels[{i}] = {int(inst.action_labels[i])} out of range [0, {dims.A})"
                )
    except InstanceValidationError as e:
        logger.error(f"Invalid frame instance: {e}")
        raise
