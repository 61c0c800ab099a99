"""
Tests for the per-step cross-entropy and the gate penalty.
"""

import numpy as np
import pytest

from structinfer.exceptions import InvalidArgumentError, MissingLabelsError
from structinfer.inference import forward
from structinfer.losses import gate_penalty, labels_of, loss
from structinfer.models import FrameInstance


def test_cross_entropy_sums_over_steps(gated_params, frame):
    trace = forward(gated_params, frame, T=3)
    breakdown = loss(trace, lambda_=0.0)
    expected_scene = -sum(np.log(p.c_s[frame.scene_label]) for p in trace.preds)
    expected_person = -sum(
        np.mean(np.log(p.c_p[np.arange(frame.M), frame.action_labels])) for p in trace.preds
    )
    assert breakdown.ce_scene == pytest.approx(expected_scene, rel=1e-12)
    assert breakdown.ce_person == pytest.approx(expected_person, rel=1e-12)
    assert breakdown.gate_l1 == 0.0
    assert breakdown.total == pytest.approx(expected_scene + expected_person, rel=1e-12)


def test_gate_penalty_counts_each_edge_once(gated_params, frame):
    trace = forward(gated_params, frame, T=2)
    upper = np.triu_indices(frame.M, k=1)
    expected = sum(s.gate_pp[upper].sum() + s.gate_ps.sum() for s in trace.states)
    assert gate_penalty(trace, 0.5) == pytest.approx(0.5 * expected, rel=1e-12)
    assert loss(trace, 0.5).gate_l1 == pytest.approx(0.5 * expected, rel=1e-12)


def test_ungated_trace_has_no_penalty(gated_params, frame):
    trace = forward(gated_params, frame, T=2, gated=False)
    assert gate_penalty(trace, 10.0) == 0.0


def test_explicit_labels_override_the_frame(gated_params, frame):
    trace = forward(gated_params, frame, T=1)
    labels = (0, np.zeros(frame.M, dtype=int))
    breakdown = loss(trace, 0.0, labels=labels)
    assert breakdown.ce_scene == pytest.approx(-np.log(trace.preds[0].c_s[0]))


def test_missing_or_short_labels(gated_params, frame):
    unlabeled = FrameInstance(scene_unary=frame.scene_unary, person_unaries=frame.person_unaries)
    with pytest.raises(MissingLabelsError):
        loss(forward(gated_params, unlabeled, T=1), 0.0)
    with pytest.raises(InvalidArgumentError):
        labels_of(frame, (0, [1, 2]))
