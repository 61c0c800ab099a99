"""
Tests for the unrolled message-passing forward pass.
"""

import numpy as np
import pytest

from structinfer.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidArgumentError,
)
from structinfer.inference import (
    apply_gates,
    directional_gate,
    edge_gates,
    forward,
    gate_context,
    init_messages,
    person_to_person_message,
    person_to_scene_message,
    predict_labels,
    predict_persons,
    predict_scene,
    scene_to_person_message,
)
from structinfer.models import Dims
from structinfer.params import GATE_BLOCKS, init_params


def _gates_forced_open(params):
    """Zero gate weights and a huge bias: every directional gate evaluates to exactly 1."""

    def force(name, arr):
        if name not in GATE_BLOCKS:
            return np.array(arr, copy=True)
        if name.endswith("_bias"):
            return np.array(1e3)
        return np.zeros_like(arr)

    return params.with_blocks([b.map(force) for b in params.blocks])


def test_initial_state_copies_unaries(frame):
    state, preds = init_messages(frame)
    np.testing.assert_array_equal(preds.c_p, frame.person_unaries)
    np.testing.assert_array_equal(preds.c_s, frame.scene_unary)
    np.testing.assert_array_equal(state.m_ps, frame.person_unaries)
    np.testing.assert_array_equal(state.m_pp[1, 2], frame.person_unaries[1])
    assert not np.any(state.m_pp[2, 2])
    assert np.all(state.gate_ps == 1.0)


@pytest.mark.parametrize("gated", [True, False])
def test_outputs_are_distributions(gated_params, frame, gated):
    trace = forward(gated_params, frame, T=3, gated=gated)
    assert len(trace.states) == 3 and len(trace.preds) == 3
    off = ~np.eye(frame.M, dtype=bool)
    for state, preds in zip(trace.states, trace.preds):
        np.testing.assert_allclose(preds.c_s.sum(), 1.0)
        np.testing.assert_allclose(preds.c_p.sum(axis=1), np.ones(frame.M))
        np.testing.assert_allclose(state.m_pp[off].sum(axis=1), np.ones(off.sum()))
        np.testing.assert_allclose(state.m_ps.sum(axis=1), np.ones(frame.M))
        np.testing.assert_allclose(state.m_sp.sum(axis=1), np.ones(frame.M))
        assert np.all(state.gate_pp[off] > 0) and np.all(state.gate_pp[off] <= 1)
        np.testing.assert_array_equal(state.gate_pp, state.gate_pp.T)
        assert not np.any(np.diag(state.gate_pp))


def test_normalisation_over_seeded_runs(dims, make_frame):
    rng = np.random.default_rng(99)
    for case in range(100):
        M = int(rng.integers(1, 9))
        T = int(rng.integers(1, 5))
        mode = "tied" if case % 2 else "untied"
        params = init_params(dims, T=T, mode=mode, gated=True, seed=case)
        trace = forward(params, make_frame(M=M, seed=case), T=T)
        off = ~np.eye(M, dtype=bool)
        for state, preds in zip(trace.states, trace.preds):
            np.testing.assert_allclose(preds.c_s.sum(), 1.0, rtol=0, atol=1e-9)
            np.testing.assert_allclose(preds.c_p.sum(axis=1), 1.0, rtol=0, atol=1e-9)
            np.testing.assert_allclose(state.m_ps.sum(axis=1), 1.0, rtol=0, atol=1e-9)
            np.testing.assert_allclose(state.m_sp.sum(axis=1), 1.0, rtol=0, atol=1e-9)
            np.testing.assert_allclose(
                state.gated_ps.sum(axis=1), state.gate_ps, rtol=0, atol=1e-12
            )
            np.testing.assert_allclose(
                state.gated_sp.sum(axis=1), state.gate_ps, rtol=0, atol=1e-12
            )
            if M > 1:
                np.testing.assert_allclose(state.m_pp[off].sum(axis=1), 1.0, rtol=0, atol=1e-9)
                np.testing.assert_allclose(
                    state.gated_pp[off].sum(axis=1), state.gate_pp[off], rtol=0, atol=1e-12
                )


def test_ungated_forward_keeps_gates_at_one(gated_params, frame):
    trace = forward(gated_params, frame, T=2, gated=False)
    assert not trace.gated
    for state in trace.states:
        assert np.all(state.gate_ps == 1.0)
        np.testing.assert_array_equal(state.gate_pp, 1.0 - np.eye(frame.M))
        assert state.dir_pp is None


def test_single_edge_operations_match_vectorised_step(gated_params, frame):
    trace = forward(gated_params, frame, T=2)
    blocks = gated_params.block_for_step(2)
    prev, prev_preds = trace.state_before(2), trace.preds_before(2)
    raw = trace.states[1]
    M = frame.M

    for i in range(M):
        np.testing.assert_allclose(
            person_to_scene_message(blocks, prev, prev_preds, frame, i), raw.m_ps[i], atol=1e-12
        )
        np.testing.assert_allclose(
            scene_to_person_message(blocks, prev, prev_preds, frame, i), raw.m_sp[i], atol=1e-12
        )
        context = gate_context("sp", frame, prev_preds, raw, i)
        assert directional_gate(blocks, "sp", context) == pytest.approx(raw.dir_sp[i], abs=1e-12)
        context = gate_context("ps", frame, prev_preds, raw, i)
        assert directional_gate(blocks, "ps", context) == pytest.approx(raw.dir_ps[i], abs=1e-12)
        for j in range(M):
            if i == j:
                continue
            np.testing.assert_allclose(
                person_to_person_message(blocks, prev, prev_preds, frame, i, j),
                raw.m_pp[i, j],
                atol=1e-12,
            )
            context = gate_context("pp", frame, prev_preds, raw, i, j)
            assert directional_gate(blocks, "pp", context) == pytest.approx(
                raw.dir_pp[i, j], abs=1e-12
            )

    gate_pp, gate_ps = edge_gates(raw.dir_pp, raw.dir_ps, raw.dir_sp)
    np.testing.assert_allclose(gate_pp, raw.gate_pp)
    np.testing.assert_allclose(gate_ps, raw.gate_ps)
    gated_pp, gated_ps, gated_sp = apply_gates(raw.m_pp, raw.m_ps, raw.m_sp, gate_pp, gate_ps)
    np.testing.assert_allclose(gated_pp, raw.gated_pp)
    np.testing.assert_allclose(gated_sp, raw.gated_sp)
    np.testing.assert_allclose(predict_scene(blocks, raw, frame), trace.preds[1].c_s, atol=1e-12)
    np.testing.assert_allclose(
        predict_persons(blocks, raw, frame), trace.preds[1].c_p, atol=1e-12
    )


def test_edge_gate_averages_both_directions():
    dir_pp = np.array([[0.0, 0.2], [0.6, 0.0]])
    gate_pp, gate_ps = edge_gates(dir_pp, np.array([0.1, 0.9]), np.array([0.3, 0.5]))
    np.testing.assert_allclose(gate_pp, [[0.0, 0.4], [0.4, 0.0]])
    np.testing.assert_allclose(gate_ps, [0.2, 0.7])


def test_open_gates_reproduce_the_ungated_machine(dims, make_frame):
    params = _gates_forced_open(init_params(dims, T=3, mode="untied", gated=True, seed=2))
    for seed in range(5):
        inst = make_frame(M=1 + seed, seed=seed)
        gated = forward(params, inst, T=3, gated=True)
        ungated = forward(params, inst, T=3, gated=False)
        for a, b in zip(gated.preds, ungated.preds):
            np.testing.assert_allclose(a.c_s, b.c_s, rtol=0, atol=1e-12)
            np.testing.assert_allclose(a.c_p, b.c_p, rtol=0, atol=1e-12)


def test_person_permutation_equivariance(dims, make_frame, rng):
    params = init_params(dims, T=3, mode="tied", gated=True, seed=9)
    for seed in range(20):
        inst = make_frame(M=int(rng.integers(1, 7)), seed=100 + seed)
        order = rng.permutation(inst.M)
        base = forward(params, inst, T=3)
        moved = forward(params, inst.permuted(order), T=3)
        for a, b in zip(base.preds, moved.preds):
            np.testing.assert_allclose(b.c_s, a.c_s, rtol=0, atol=1e-9)
            np.testing.assert_allclose(b.c_p, a.c_p[order], rtol=0, atol=1e-9)


def test_single_person_frame_runs(gated_params, make_frame):
    inst = make_frame(M=1, seed=4)
    trace = forward(gated_params, inst, T=3)
    assert trace.states[-1].m_pp.shape == (1, 1, 5)
    assert not np.any(trace.states[-1].m_pp)
    np.testing.assert_allclose(trace.preds[-1].c_p.sum(), 1.0)


def test_forward_is_deterministic(gated_params, frame):
    a = forward(gated_params, frame, T=3)
    b = forward(gated_params, frame, T=3)
    for x, y in zip(a.preds, b.preds):
        np.testing.assert_array_equal(x.c_s, y.c_s)
        np.testing.assert_array_equal(x.c_p, y.c_p)


def test_untied_weights_cannot_run_longer(dims, frame):
    params = init_params(dims, T=2, mode="untied", gated=True, seed=0)
    forward(params, frame, T=2)
    with pytest.raises(ConfigurationError):
        forward(params, frame, T=3)


def test_argument_errors(gated_params, frame, make_frame):
    with pytest.raises(InvalidArgumentError):
        forward(gated_params, frame, T=0)
    other = make_frame(M=3, seed=1, problem=Dims(A=4, S=4))
    with pytest.raises(DimensionMismatchError):
        forward(gated_params, other, T=1)
    state, preds = init_messages(frame)
    with pytest.raises(InvalidArgumentError):
        person_to_person_message(gated_params.blocks[0], state, preds, frame, 1, 1)
    with pytest.raises(InvalidArgumentError):
        person_to_scene_message(gated_params.blocks[0], state, preds, frame, frame.M)


def test_predict_labels_reads_last_step(gated_params, frame):
    trace = forward(gated_params, frame, T=2)
    scene, persons = predict_labels(trace)
    assert scene == int(np.argmax(trace.preds[-1].c_s))
    np.testing.assert_array_equal(persons, np.argmax(trace.preds[-1].c_p, axis=1))
