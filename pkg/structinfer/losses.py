import logging
from typing import Optional, Tuple

import numpy as np

from .exceptions import InvalidArgumentError, MissingLabelsError
from .inference import InferenceTrace
from .models import FrameInstance, LossBreakdown
from .utils.numeric import log_prob

logger = logging.getLogger(__name__)

Labels = Tuple[int, np.ndarray]


def labels_of(inst: FrameInstance, labels: Optional[Labels] = None) -> Labels:
    """
    Resolve the labels to train against: explicit ``labels`` win over the frame's own.

    Raises:
        MissingLabelsError: If neither source carries both a scene and all action labels
    """
    if labels is not None:
        scene_label, action_labels = labels
        action_labels = np.asarray(action_labels, dtype=np.int64)
        if action_labels.shape != (inst.M,):
            raise InvalidArgumentError(
                f"Expected {inst.M} action labels, got {action_labels.shape[0]}"
            )
        return int(scene_label), action_labels
    if not inst.is_labeled:
        raise MissingLabelsError("Loss requires a scene label and an action label per person")
    return int(inst.scene_label), inst.action_labels  # type: ignore[arg-type]


def gate_penalty(trace: InferenceTrace, lambda_: float) -> float:
    """``lambda_`` times the sum of every edge gate over all steps; zero for ungated traces."""
    if not trace.gated or lambda_ == 0.0:
        return 0.0
    total = 0.0
    for state in trace.states:
        total += float(np.sum(np.triu(state.gate_pp, k=1))) + float(np.sum(state.gate_ps))
    return lambda_ * total


def loss(
    trace: InferenceTrace, lambda_: float, labels: Optional[Labels] = None
) -> LossBreakdown:
    """
    Cross-entropy at every step plus the L1 gate penalty.

    Args:
        trace: A forward trace
        lambda_: Coefficient of the gate penalty
        labels: Optional ``(scene_label, action_labels)``; defaults to the frame's labels

    Returns:
        Summed scene cross-entropy, summed person-averaged cross-entropy and the penalty

    Raises:
        MissingLabelsError: If no labels are available
    """
    inst = trace.instance
    scene_label, action_labels = labels_of(inst, labels)
    ce_scene = 0.0
    ce_person = 0.0
    for preds in trace.preds:
        ce_scene -= log_prob(preds.c_s, scene_label)
        person_terms = sum(log_prob(preds.c_p[i], int(a)) for i, a in enumerate(action_labels))
        ce_person -= person_terms / inst.M
    return LossBreakdown(
        ce_scene=ce_scene, ce_person=ce_person, gate_l1=gate_penalty(trace, lambda_)
    )
