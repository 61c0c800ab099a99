"""
Gated recurrent message passing over a frame.

One inference step computes every directed message from the previous step's gated
messages and predictions, scores a gate for each message, averages the two directional
gates of an edge into an edge gate, scales both messages of the edge by it, and finally
predicts the scene and every person from the gated messages.

Array conventions for ``M`` persons:

* ``m_pp[i, j]`` is the message from person ``i`` to person ``j``; the diagonal is zero.
* ``m_ps[i]`` is the message from person ``i`` to the scene node.
* ``m_sp[i]`` is the message from the scene node to person ``i``.
* ``gate_pp`` is a symmetric ``M x M`` matrix (zero diagonal), ``gate_ps[i]`` the gate of
  the scene edge of person ``i``.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr

from .exceptions import DimensionMismatchError, InvalidArgumentError
from .models import FrameInstance
from .params import ModelParams, ParamBlockSet
from .utils.numeric import sigmoid, softmax

logger = logging.getLogger(__name__)

GateKind = Literal["pp", "sp", "ps"]


class MessageState(BaseModel):
    """All directed messages, gates and gated messages at one step."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    m_pp: np.ndarray
    m_ps: np.ndarray
    m_sp: np.ndarray
    gate_pp: np.ndarray
    gate_ps: np.ndarray
    gated_pp: np.ndarray
    gated_ps: np.ndarray
    gated_sp: np.ndarray
    dir_pp: Optional[np.ndarray] = None
    dir_sp: Optional[np.ndarray] = None
    dir_ps: Optional[np.ndarray] = None


class Predictions(BaseModel):
    """Scene and person class distributions at one step."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    c_s: np.ndarray
    c_p: np.ndarray


@dataclass
class StepCache:
    """Intermediate values of one step kept for the reverse pass."""

    avg_pp: np.ndarray
    avg_in: np.ndarray
    avg_sp: np.ndarray
    gate_avg_pp: np.ndarray
    gate_avg_in: np.ndarray
    gate_avg_ps: np.ndarray
    h_s: np.ndarray
    h_p: np.ndarray


class InferenceTrace(BaseModel):
    """Complete record of an unrolled forward pass."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    instance: FrameInstance
    T: int
    gated: bool
    initial_state: MessageState
    initial_preds: Predictions
    states: List[MessageState]
    preds: List[Predictions]

    _caches: List[StepCache] = PrivateAttr(default_factory=list)

    def state_before(self, t: int) -> MessageState:
        """Gated state consumed by step ``t`` (1-based)."""
        return self.initial_state if t == 1 else self.states[t - 2]

    def preds_before(self, t: int) -> Predictions:
        return self.initial_preds if t == 1 else self.preds[t - 2]


def _off_diagonal(M: int) -> np.ndarray:
    return ~np.eye(M, dtype=bool)


def _zero_diagonal(arr: np.ndarray) -> np.ndarray:
    M = arr.shape[0]
    idx = np.arange(M)
    arr[idx, idx] = 0.0
    return arr


def _mean_excluding_self(values: np.ndarray) -> np.ndarray:
    """Row ``k`` is the mean of all other rows; zero rows when there is nobody else."""
    M = values.shape[0]
    if M < 2:
        return np.zeros_like(values)
    return (np.sum(values, axis=0)[None, :] - values) / (M - 1)


def _incoming_mean(pp: np.ndarray) -> np.ndarray:
    """Row ``i`` is the mean of ``pp[k, i]`` over ``k != i``."""
    M = pp.shape[0]
    if M < 2:
        return np.zeros((M, pp.shape[2]))
    return np.sum(pp, axis=0) / (M - 1)


def _incoming_mean_excluding(pp: np.ndarray) -> np.ndarray:
    """Entry ``[i, j]`` is the mean of ``pp[k, i]`` over ``k`` not in ``{i, j}``."""
    M = pp.shape[0]
    out = np.zeros_like(pp)
    if M < 3:
        return out
    incoming = np.sum(pp, axis=0)
    out = (incoming[:, None, :] - np.transpose(pp, (1, 0, 2))) / (M - 2)
    return _zero_diagonal(out)


def _check_index(index: int, M: int) -> None:
    if not 0 <= index < M:
        raise InvalidArgumentError(f"Person index {index} out of range for M={M}")


def init_messages(inst: FrameInstance) -> Tuple[MessageState, Predictions]:
    """
    Initial messages and predictions: person-sourced messages copy the person unary, the
    scene-sourced messages copy the scene unary, every gate is 1 and the step-0
    predictions are the unaries themselves.
    """
    M = inst.M
    x_p = np.array(inst.person_unaries, dtype=np.float64)
    x_s = np.array(inst.scene_unary, dtype=np.float64)
    m_pp = _zero_diagonal(np.repeat(x_p[:, None, :], M, axis=1))
    m_ps = x_p.copy()
    m_sp = np.repeat(x_s[None, :], M, axis=0)
    state = MessageState(
        m_pp=m_pp,
        m_ps=m_ps,
        m_sp=m_sp,
        gate_pp=_off_diagonal(M).astype(np.float64),
        gate_ps=np.ones(M),
        gated_pp=m_pp.copy(),
        gated_ps=m_ps.copy(),
        gated_sp=m_sp.copy(),
    )
    return state, Predictions(c_s=x_s.copy(), c_p=x_p.copy())


# --- single-edge operations -------------------------------------------------------------


def person_to_person_message(
    blocks: ParamBlockSet,
    state: MessageState,
    preds: Predictions,
    inst: FrameInstance,
    i: int,
    j: int,
) -> np.ndarray:
    """Message ``m_{i->j}`` from the previous step's gated state."""
    M = inst.M
    _check_index(i, M)
    _check_index(j, M)
    if i == j:
        raise InvalidArgumentError("A person does not send a message to itself")
    others = [k for k in range(M) if k not in (i, j)]
    avg = np.zeros(blocks.W_aa.shape[1])
    if others:
        avg = sum(state.gated_pp[k, i] for k in others) / len(others)
    z = (
        blocks.W_xm_p @ inst.person_unaries[i]
        + blocks.W_cm_p @ preds.c_p[i]
        + blocks.W_aa @ avg
        + blocks.W_sa @ state.gated_sp[i]
        + blocks.b_pp
    )
    return softmax(z)


def person_to_scene_message(
    blocks: ParamBlockSet,
    state: MessageState,
    preds: Predictions,
    inst: FrameInstance,
    i: int,
) -> np.ndarray:
    """Message ``m_{i->s}`` from the previous step's gated state."""
    M = inst.M
    _check_index(i, M)
    others = [k for k in range(M) if k != i]
    avg = np.zeros(blocks.W_aa.shape[1])
    if others:
        avg = sum(state.gated_pp[k, i] for k in others) / len(others)
    z = (
        blocks.W_xm_p @ inst.person_unaries[i]
        + blocks.W_cm_p @ preds.c_p[i]
        + blocks.W_aa @ avg
        + blocks.b_ps
    )
    return softmax(z)


def scene_to_person_message(
    blocks: ParamBlockSet,
    state: MessageState,
    preds: Predictions,
    inst: FrameInstance,
    j: int,
) -> np.ndarray:
    """Message ``m_{s->j}`` from the previous step's gated state."""
    M = inst.M
    _check_index(j, M)
    others = [k for k in range(M) if k != j]
    avg = np.zeros(blocks.W_as.shape[1])
    if others:
        avg = sum(state.gated_ps[k] for k in others) / len(others)
    z = (
        blocks.W_xm_s @ inst.scene_unary
        + blocks.W_cm_s @ preds.c_s
        + blocks.W_as @ avg
        + blocks.b_sp
    )
    return softmax(z)


def gate_context(
    kind: GateKind,
    inst: FrameInstance,
    preds: Predictions,
    raw: MessageState,
    i: int,
    j: Optional[int] = None,
) -> np.ndarray:
    """
    Concatenated gate input for one directional message, built from the current step's raw
    messages and the previous step's predictions.

    ``pp`` scores ``m_{i->j}``; ``sp`` scores ``m_{s->i}``; ``ps`` scores ``m_{i->s}``.
    """
    M = inst.M
    _check_index(i, M)
    if kind == "pp":
        if j is None:
            raise InvalidArgumentError("A person-to-person gate needs both endpoints")
        _check_index(j, M)
        others = [k for k in range(M) if k not in (i, j)]
        avg = np.zeros(inst.person_unaries.shape[1])
        if others:
            avg = sum(raw.m_pp[k, j] for k in others) / len(others)
        return np.concatenate([inst.person_unaries[j], preds.c_p[j], raw.m_pp[i, j], avg])
    others = [k for k in range(M) if k != i]
    if kind == "sp":
        avg = np.zeros(inst.person_unaries.shape[1])
        if others:
            avg = sum(raw.m_pp[k, i] for k in others) / len(others)
        return np.concatenate([inst.person_unaries[i], preds.c_p[i], raw.m_sp[i], avg])
    if kind == "ps":
        avg = np.zeros(inst.person_unaries.shape[1])
        if others:
            avg = sum(raw.m_ps[k] for k in others) / len(others)
        return np.concatenate([inst.scene_unary, preds.c_s, raw.m_ps[i], avg])
    raise InvalidArgumentError(f"Unknown gate kind: {kind}")


def directional_gate(blocks: ParamBlockSet, kind: GateKind, context: np.ndarray) -> float:
    """Sigmoid of the gate row vector of ``kind`` dotted with ``context`` plus its bias."""
    weights = getattr(blocks, f"g_{kind}")
    bias = getattr(blocks, f"g_{kind}_bias")
    if context.shape != weights.shape:
        raise InvalidArgumentError(
            f"Gate {kind} expects a context of length {weights.shape[0]}, got {context.shape[0]}"
        )
    return float(sigmoid(np.array([np.dot(weights, context) + float(bias)]))[0])


def edge_gates(
    dir_pp: np.ndarray, dir_ps: np.ndarray, dir_sp: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Average both directional gates of each edge.

    Args:
        dir_pp: ``[i, j]`` is the gate of ``m_{i->j}``
        dir_ps: gate of ``m_{i->s}`` per person
        dir_sp: gate of ``m_{s->i}`` per person

    Returns:
        Symmetric person-person edge gates (zero diagonal) and scene-edge gates
    """
    gate_pp = _zero_diagonal((dir_pp + dir_pp.T) / 2.0)
    gate_ps = (dir_ps + dir_sp) / 2.0
    return gate_pp, gate_ps


def apply_gates(
    m_pp: np.ndarray,
    m_ps: np.ndarray,
    m_sp: np.ndarray,
    gate_pp: np.ndarray,
    gate_ps: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scale each raw message by the gate of its edge; both directions share the edge gate."""
    return gate_pp[:, :, None] * m_pp, gate_ps[:, None] * m_ps, gate_ps[:, None] * m_sp


def predict_scene(blocks: ParamBlockSet, state: MessageState, inst: FrameInstance) -> np.ndarray:
    """Scene distribution from the scene unary and the mean gated person-to-scene message."""
    h_s = np.concatenate([inst.scene_unary, np.sum(state.gated_ps, axis=0) / inst.M])
    return softmax(blocks.W_hc1 @ h_s + blocks.b_hc1)


def predict_persons(
    blocks: ParamBlockSet, state: MessageState, inst: FrameInstance
) -> np.ndarray:
    """Person action distributions from unary, mean incoming person message and scene message."""
    h_p = np.concatenate(
        [inst.person_unaries, _incoming_mean(state.gated_pp), state.gated_sp], axis=1
    )
    return softmax(h_p @ blocks.W_hc2.T + blocks.b_hc2)


# --- vectorised step ----------------------------------------------------------------------


def _step(
    blocks: ParamBlockSet,
    inst: FrameInstance,
    prev: MessageState,
    prev_preds: Predictions,
    gated: bool,
) -> Tuple[MessageState, Predictions, StepCache]:
    M = inst.M
    A = blocks.W_aa.shape[0]
    S = blocks.W_xm_s.shape[0]
    x_p = inst.person_unaries
    x_s = inst.scene_unary
    c_p, c_s = prev_preds.c_p, prev_preds.c_s

    # messages
    avg_pp = _incoming_mean_excluding(prev.gated_pp)
    avg_in = _incoming_mean(prev.gated_pp)
    avg_sp = _mean_excluding_self(prev.gated_ps)
    base = x_p @ blocks.W_xm_p.T + c_p @ blocks.W_cm_p.T
    z_pp = (
        base[:, None, :]
        + avg_pp @ blocks.W_aa.T
        + (prev.gated_sp @ blocks.W_sa.T)[:, None, :]
        + blocks.b_pp
    )
    m_pp = _zero_diagonal(softmax(z_pp))
    m_ps = softmax(base + avg_in @ blocks.W_aa.T + blocks.b_ps)
    scene_base = blocks.W_xm_s @ x_s + blocks.W_cm_s @ c_s
    m_sp = softmax(scene_base[None, :] + avg_sp @ blocks.W_as.T + blocks.b_sp)

    # gates
    gate_avg_pp = np.zeros_like(m_pp)
    if M >= 3:
        gate_avg_pp = _zero_diagonal((np.sum(m_pp, axis=0)[None, :, :] - m_pp) / (M - 2))
    gate_avg_in = _incoming_mean(m_pp)
    gate_avg_ps = _mean_excluding_self(m_ps)

    if gated:
        a1, a2, a3, a4 = np.split(blocks.g_pp, [A, 2 * A, 3 * A])
        score_pp = (
            (x_p @ a1 + c_p @ a2)[None, :] + m_pp @ a3 + gate_avg_pp @ a4 + float(blocks.g_pp_bias)
        )
        dir_pp = _zero_diagonal(sigmoid(score_pp))
        b1, b2, b3, b4 = np.split(blocks.g_sp, [A, 2 * A, 2 * A + S])
        score_sp = x_p @ b1 + c_p @ b2 + m_sp @ b3 + gate_avg_in @ b4 + float(blocks.g_sp_bias)
        dir_sp = sigmoid(score_sp)
        e1, e2, e3, e4 = np.split(blocks.g_ps, [S, 2 * S, 2 * S + A])
        score_ps = (
            float(x_s @ e1 + c_s @ e2) + m_ps @ e3 + gate_avg_ps @ e4 + float(blocks.g_ps_bias)
        )
        dir_ps = sigmoid(score_ps)
        gate_pp, gate_ps = edge_gates(dir_pp, dir_ps, dir_sp)
        gated_pp, gated_ps, gated_sp = apply_gates(m_pp, m_ps, m_sp, gate_pp, gate_ps)
    else:
        dir_pp = dir_sp = dir_ps = None
        gate_pp = _off_diagonal(M).astype(np.float64)
        gate_ps = np.ones(M)
        gated_pp, gated_ps, gated_sp = m_pp, m_ps, m_sp

    state = MessageState(
        m_pp=m_pp,
        m_ps=m_ps,
        m_sp=m_sp,
        gate_pp=gate_pp,
        gate_ps=gate_ps,
        gated_pp=gated_pp,
        gated_ps=gated_ps,
        gated_sp=gated_sp,
        dir_pp=dir_pp,
        dir_sp=dir_sp,
        dir_ps=dir_ps,
    )

    # predictions
    h_s = np.concatenate([x_s, np.sum(gated_ps, axis=0) / M])
    new_c_s = softmax(blocks.W_hc1 @ h_s + blocks.b_hc1)
    h_p = np.concatenate([x_p, _incoming_mean(gated_pp), gated_sp], axis=1)
    new_c_p = softmax(h_p @ blocks.W_hc2.T + blocks.b_hc2)

    cache = StepCache(
        avg_pp=avg_pp,
        avg_in=avg_in,
        avg_sp=avg_sp,
        gate_avg_pp=gate_avg_pp,
        gate_avg_in=gate_avg_in,
        gate_avg_ps=gate_avg_ps,
        h_s=h_s,
        h_p=h_p,
    )
    return state, Predictions(c_s=new_c_s, c_p=new_c_p), cache


def forward(
    params: ModelParams, inst: FrameInstance, T: int, gated: Optional[bool] = None
) -> InferenceTrace:
    """
    Run ``T`` steps of gated message passing on one frame.

    Args:
        params: Model parameters; tied models reuse block set 0, untied ones use block set
            ``t - 1`` at step ``t``
        inst: A validated frame
        T: Number of steps
        gated: Overrides ``params.gated``; ``False`` fixes every edge gate to 1

    Returns:
        The full trace, including the step-0 state and predictions

    Raises:
        DimensionMismatchError: If the frame's dimensions disagree with the parameters
    """
    dims = params.dims
    if inst.scene_unary.shape != (dims.S,) or inst.person_unaries.shape[1] != dims.A:
        raise DimensionMismatchError(
            f"Frame has S={inst.scene_unary.shape[0]}, A={inst.person_unaries.shape[1]}; "
            f"parameters expect S={dims.S}, A={dims.A}"
        )
    if T < 1:
        raise InvalidArgumentError(f"T must be at least 1, got {T}")
    use_gates = params.gated if gated is None else gated

    state, preds = init_messages(inst)
    initial_state, initial_preds = state, preds
    states: List[MessageState] = []
    pred_list: List[Predictions] = []
    caches: List[StepCache] = []
    for t in range(1, T + 1):
        blocks = params.block_for_step(t)
        state, preds, cache = _step(blocks, inst, state, preds, use_gates)
        states.append(state)
        pred_list.append(preds)
        caches.append(cache)

    trace = InferenceTrace(
        instance=inst,
        T=T,
        gated=use_gates,
        initial_state=initial_state,
        initial_preds=initial_preds,
        states=states,
        preds=pred_list,
    )
    trace._caches = caches
    return trace


def predict_labels(trace: InferenceTrace) -> Tuple[int, np.ndarray]:
    """Scene label and person labels read off the final step."""
    final = trace.preds[-1]
    return int(np.argmax(final.c_s)), np.argmax(final.c_p, axis=1)
