"""
Reverse-mode gradients through the unrolled inference machine, plus an independent
central-difference oracle that checks them.

The reverse pass walks the steps from ``T`` down to 1. At each step it receives the
adjoints of that step's gated messages and predictions from the step above, adds the
contributions of the step's own cross-entropy and gate penalty, and pulls everything back
through the prediction layers, the gate products, the gate sigmoids and the message
softmaxes into the weights and into the previous step's gated messages and predictions.
The step-0 state depends on the frame alone, so its adjoints are dropped.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from .exceptions import DimensionMismatchError
from .inference import InferenceTrace, forward
from .losses import Labels, labels_of, loss
from .models import Dims, FrameInstance, LossBreakdown, SynthConfig, TrainConfig, WeightMode
from .params import (
    BIAS_BLOCKS,
    GATE_BLOCKS,
    Gradients,
    ModelParams,
    ParamBlockSet,
    init_params,
)
from .synth import generate
from .utils.numeric import sigmoid_backward, softmax_backward

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-5


def _mask_diagonal(arr: np.ndarray) -> np.ndarray:
    idx = np.arange(arr.shape[0])
    arr[idx, idx] = 0.0
    return arr


def _one_hot(index, size: int) -> np.ndarray:
    return np.eye(size)[index]


def _backward_step(
    blocks: ParamBlockSet,
    grad: Dict[str, np.ndarray],
    trace: InferenceTrace,
    t: int,
    labels: Labels,
    lambda_: float,
    d_next: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Pull the adjoints of step ``t`` back one step, accumulating into ``grad``.

    ``d_next`` holds the adjoints of this step's ``(gated_pp, gated_ps, gated_sp, c_p, c_s)``
    coming from step ``t + 1``; the same tuple is returned for step ``t - 1``.
    """
    inst = trace.instance
    M = inst.M
    A = blocks.W_aa.shape[0]
    S = blocks.W_xm_s.shape[0]
    x_p, x_s = inst.person_unaries, inst.scene_unary
    state = trace.states[t - 1]
    preds = trace.preds[t - 1]
    cache = trace._caches[t - 1]
    prev = trace.state_before(t)
    prev_preds = trace.preds_before(t)
    c_p_prev, c_s_prev = prev_preds.c_p, prev_preds.c_s
    scene_label, action_labels = labels

    d_gpp, d_gps, d_gsp, d_cp, d_cs = (np.array(d, copy=True) for d in d_next)

    # prediction layers, with this step's cross-entropy folded into the logit gradient
    dz_s = softmax_backward(preds.c_s, d_cs) + (preds.c_s - _one_hot(scene_label, S))
    dz_p = softmax_backward(preds.c_p, d_cp) + (preds.c_p - _one_hot(action_labels, A)) / M
    grad["W_hc1"] += np.outer(dz_s, cache.h_s)
    grad["b_hc1"] += dz_s
    d_hs = blocks.W_hc1.T @ dz_s
    d_gps += d_hs[S:][None, :] / M
    grad["W_hc2"] += dz_p.T @ cache.h_p
    grad["b_hc2"] += np.sum(dz_p, axis=0)
    d_hp = dz_p @ blocks.W_hc2
    if M >= 2:
        d_gpp += _mask_diagonal(np.repeat(d_hp[None, :, A : 2 * A] / (M - 1), M, axis=0))
    d_gsp += d_hp[:, 2 * A :]

    # gate products
    if trace.gated:
        d_rpp = state.gate_pp[:, :, None] * d_gpp
        d_rps = state.gate_ps[:, None] * d_gps
        d_rsp = state.gate_ps[:, None] * d_gsp
        d_epp = np.sum(d_gpp * state.m_pp, axis=2)
        d_eps = np.sum(d_gps * state.m_ps, axis=1) + np.sum(d_gsp * state.m_sp, axis=1)
        if lambda_:
            d_epp += lambda_ * np.triu(np.ones((M, M)), k=1)
            d_eps += lambda_
        d_dpp = _mask_diagonal((d_epp + d_epp.T) / 2.0)
        d_dps = d_eps / 2.0
        d_dsp = d_eps / 2.0
        _gate_backward(blocks, grad, trace, t, d_dpp, d_dsp, d_dps, d_rpp, d_rsp, d_rps)
        d_cp_prev, d_cs_prev = _gate_context_backward(blocks, trace, t, d_dpp, d_dsp, d_dps)
    else:
        d_rpp, d_rps, d_rsp = d_gpp, d_gps, d_gsp
        d_cp_prev = np.zeros_like(c_p_prev)
        d_cs_prev = np.zeros_like(c_s_prev)

    # message softmaxes
    d_rpp = _mask_diagonal(np.array(d_rpp, copy=True))
    dz_pp = softmax_backward(state.m_pp, d_rpp)
    dz_ps = softmax_backward(state.m_ps, d_rps)
    dz_sp = softmax_backward(state.m_sp, d_rsp)

    dz_pp_rows = np.sum(dz_pp, axis=1)
    d_base = dz_pp_rows + dz_ps
    grad["W_xm_p"] += d_base.T @ x_p
    grad["W_cm_p"] += d_base.T @ c_p_prev
    d_cp_prev += d_base @ blocks.W_cm_p
    grad["W_aa"] += np.einsum("ija,ijb->ab", dz_pp, cache.avg_pp) + dz_ps.T @ cache.avg_in
    grad["W_sa"] += dz_pp_rows.T @ prev.gated_sp
    grad["b_pp"] += np.sum(dz_pp_rows, axis=0)
    grad["b_ps"] += np.sum(dz_ps, axis=0)

    dz_sp_sum = np.sum(dz_sp, axis=0)
    grad["W_xm_s"] += np.outer(dz_sp_sum, x_s)
    grad["W_cm_s"] += np.outer(dz_sp_sum, c_s_prev)
    d_cs_prev += blocks.W_cm_s.T @ dz_sp_sum
    grad["W_as"] += dz_sp.T @ cache.avg_sp
    grad["b_sp"] += dz_sp_sum

    # averages over the previous step's gated messages
    d_gpp_prev = np.zeros_like(prev.gated_pp)
    d_gps_prev = np.zeros_like(prev.gated_ps)
    d_gsp_prev = dz_pp_rows @ blocks.W_sa
    if M >= 3:
        d_avg_pp = _mask_diagonal(dz_pp @ blocks.W_aa)
        rows = np.sum(d_avg_pp, axis=1)
        d_gpp_prev += (rows[None, :, :] - np.transpose(d_avg_pp, (1, 0, 2))) / (M - 2)
    if M >= 2:
        d_avg_in = dz_ps @ blocks.W_aa
        d_gpp_prev += d_avg_in[None, :, :] / (M - 1)
        d_avg_sp = dz_sp @ blocks.W_as
        d_gps_prev += (np.sum(d_avg_sp, axis=0)[None, :] - d_avg_sp) / (M - 1)
    _mask_diagonal(d_gpp_prev)

    return d_gpp_prev, d_gps_prev, d_gsp_prev, d_cp_prev, d_cs_prev


def _gate_backward(
    blocks: ParamBlockSet,
    grad: Dict[str, np.ndarray],
    trace: InferenceTrace,
    t: int,
    d_dpp: np.ndarray,
    d_dsp: np.ndarray,
    d_dps: np.ndarray,
    d_rpp: np.ndarray,
    d_rsp: np.ndarray,
    d_rps: np.ndarray,
) -> None:
    """Gate weight gradients; also adds the gates' dependence on raw messages in place."""
    inst = trace.instance
    M = inst.M
    A = blocks.W_aa.shape[0]
    S = blocks.W_xm_s.shape[0]
    x_p, x_s = inst.person_unaries, inst.scene_unary
    state = trace.states[t - 1]
    cache = trace._caches[t - 1]
    prev_preds = trace.preds_before(t)

    ds_pp = _mask_diagonal(sigmoid_backward(state.dir_pp, d_dpp))
    ds_sp = sigmoid_backward(state.dir_sp, d_dsp)
    ds_ps = sigmoid_backward(state.dir_ps, d_dps)

    # person-to-person: context [x_j, c_j, m_ij, mean_k m_kj]
    _, _, a3, a4 = np.split(blocks.g_pp, [A, 2 * A, 3 * A])
    cols = np.sum(ds_pp, axis=0)
    grad["g_pp"] += np.concatenate(
        [
            cols @ x_p,
            cols @ prev_preds.c_p,
            np.einsum("ij,ija->a", ds_pp, state.m_pp),
            np.einsum("ij,ija->a", ds_pp, cache.gate_avg_pp),
        ]
    )
    grad["g_pp_bias"] += np.sum(ds_pp)
    d_rpp += ds_pp[:, :, None] * a3
    if M >= 3:
        d_gavg = ds_pp[:, :, None] * a4
        d_rpp += _mask_diagonal((np.sum(d_gavg, axis=0)[None, :, :] - d_gavg) / (M - 2))

    # scene-to-person: context [x_i, c_i, m_si, mean_k m_ki]
    _, _, b3, b4 = np.split(blocks.g_sp, [A, 2 * A, 2 * A + S])
    grad["g_sp"] += np.concatenate(
        [ds_sp @ x_p, ds_sp @ prev_preds.c_p, ds_sp @ state.m_sp, ds_sp @ cache.gate_avg_in]
    )
    grad["g_sp_bias"] += np.sum(ds_sp)
    d_rsp += np.outer(ds_sp, b3)
    if M >= 2:
        d_rpp += _mask_diagonal(np.repeat(np.outer(ds_sp, b4)[None] / (M - 1), M, axis=0))

    # person-to-scene: context [x_s, c_s, m_is, mean_k m_ks]
    _, _, e3, e4 = np.split(blocks.g_ps, [S, 2 * S, 2 * S + A])
    total = np.sum(ds_ps)
    grad["g_ps"] += np.concatenate(
        [total * x_s, total * prev_preds.c_s, ds_ps @ state.m_ps, ds_ps @ cache.gate_avg_ps]
    )
    grad["g_ps_bias"] += total
    d_rps += np.outer(ds_ps, e3)
    if M >= 2:
        d_gavg_ps = np.outer(ds_ps, e4)
        d_rps += (np.sum(d_gavg_ps, axis=0)[None, :] - d_gavg_ps) / (M - 1)


def _gate_context_backward(
    blocks: ParamBlockSet,
    trace: InferenceTrace,
    t: int,
    d_dpp: np.ndarray,
    d_dsp: np.ndarray,
    d_dps: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Adjoints of the previous predictions through the gate contexts."""
    A = blocks.W_aa.shape[0]
    S = blocks.W_xm_s.shape[0]
    state = trace.states[t - 1]
    ds_pp = _mask_diagonal(sigmoid_backward(state.dir_pp, d_dpp))
    ds_sp = sigmoid_backward(state.dir_sp, d_dsp)
    ds_ps = sigmoid_backward(state.dir_ps, d_dps)
    a2 = blocks.g_pp[A : 2 * A]
    b2 = blocks.g_sp[A : 2 * A]
    e2 = blocks.g_ps[S : 2 * S]
    d_cp = np.outer(np.sum(ds_pp, axis=0), a2) + np.outer(ds_sp, b2)
    d_cs = np.sum(ds_ps) * e2
    return d_cp, d_cs


def _zero_frozen(grads: Gradients, phase: str, freeze_biases: bool) -> Gradients:
    def keep(name: str, arr: np.ndarray) -> np.ndarray:
        frozen = (
            (phase == "predictors-only" and name in GATE_BLOCKS)
            or (phase == "gates-only" and name not in GATE_BLOCKS)
            or (freeze_biases and name in BIAS_BLOCKS)
        )
        return np.zeros_like(arr) if frozen else arr

    return grads.with_blocks([b.map(keep) for b in grads.blocks])


def backward_trace(
    params: ModelParams,
    trace: InferenceTrace,
    lambda_: float,
    labels: Optional[Labels] = None,
) -> Tuple[LossBreakdown, Gradients]:
    """Loss and exact gradient of an existing trace, without phase masking."""
    inst = trace.instance
    resolved = labels_of(inst, labels)
    breakdown = loss(trace, lambda_, resolved)
    M, A, S = inst.M, params.dims.A, params.dims.S

    accum: List[Dict[str, np.ndarray]] = [
        {name: np.zeros_like(arr, dtype=np.float64) for name, arr in block.arrays()}
        for block in params.blocks
    ]
    d_next = (
        np.zeros((M, M, A)),
        np.zeros((M, A)),
        np.zeros((M, S)),
        np.zeros((M, A)),
        np.zeros(S),
    )
    for t in range(trace.T, 0, -1):
        index = 0 if params.mode == "tied" else t - 1
        d_next = _backward_step(
            params.block_for_step(t), accum[index], trace, t, resolved, lambda_, d_next
        )

    grads = params.with_blocks([ParamBlockSet(**values) for values in accum])
    return breakdown, grads


def backward(
    params: ModelParams,
    inst: FrameInstance,
    config: TrainConfig,
    labels: Optional[Labels] = None,
    gated: Optional[bool] = None,
) -> Tuple[LossBreakdown, Gradients]:
    """
    Loss and gradient of one labeled frame with respect to every parameter.

    Args:
        params: Current parameters
        inst: A labeled frame
        config: Supplies ``T``, ``lambda``, the phase and bias freezing
        labels: Optional explicit ``(scene_label, action_labels)``
        gated: Overrides ``params.gated`` for the forward pass

    Returns:
        The loss breakdown and gradients shaped exactly like ``params``. Blocks frozen by
        the phase (or by ``freeze_biases``) carry zero gradients.

    Raises:
        MissingLabelsError: If the frame is unlabeled
        DimensionMismatchError: If the frame disagrees with the parameter dimensions
    """
    if inst.person_unaries.shape[1] != params.dims.A:
        raise DimensionMismatchError(
            f"Frame has A={inst.person_unaries.shape[1]}, parameters expect A={params.dims.A}"
        )
    labels_of(inst, labels)
    trace = forward(params, inst, config.T, gated=gated)
    breakdown, grads = backward_trace(params, trace, config.lambda_, labels)
    return breakdown, _zero_frozen(grads, config.phase, config.freeze_biases)


def _scalar_loss(
    params: ModelParams,
    inst: FrameInstance,
    T: int,
    lambda_: float,
    labels: Optional[Labels],
    gated: Optional[bool],
) -> float:
    return loss(forward(params, inst, T, gated=gated), lambda_, labels).total


def finite_diff_oracle(
    params: ModelParams,
    inst: FrameInstance,
    config: TrainConfig,
    epsilon: float = DEFAULT_EPSILON,
    labels: Optional[Labels] = None,
    gated: Optional[bool] = None,
) -> float:
    """
    Compare the analytic gradient against central differences.

    Every parameter entry is nudged by ``+-epsilon`` on a private copy and the loss is
    recomputed with two full forward passes. Phase masking is not applied: the analytic
    side is the full gradient.

    Returns:
        ``max |analytic - numeric| / max(1e-8, |analytic| + |numeric|)`` over all entries
    """
    _, analytic = backward_trace(
        params, forward(params, inst, config.T, gated=gated), config.lambda_, labels
    )
    shifted = params.copy()
    worst = 0.0
    worst_at = None
    for (k, name, arr), (_, _, g) in zip(shifted.iter_arrays(), analytic.iter_arrays()):
        for idx in range(arr.size):
            original = float(arr.flat[idx])
            arr.flat[idx] = original + epsilon
            up = _scalar_loss(shifted, inst, config.T, config.lambda_, labels, gated)
            arr.flat[idx] = original - epsilon
            down = _scalar_loss(shifted, inst, config.T, config.lambda_, labels, gated)
            arr.flat[idx] = original
            numeric = (up - down) / (2.0 * epsilon)
            a = float(g.flat[idx])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            if err > worst:
                worst, worst_at = err, (k, name, idx)
    logger.debug(f"Gradient check: max relative error {worst:.3e} at {worst_at}")
    return worst


def seeded_check_case(
    dims: Dims, M: int, T: int, mode: WeightMode, gated: bool, seed: int
) -> Tuple[ModelParams, FrameInstance]:
    """
    Seeded parameters (biases drawn too, so every block is exercised) and a labeled
    synthetic frame with exactly ``M`` persons.
    """
    params = init_params(dims, T, mode, gated, seed)
    rng = np.random.default_rng(seed + 1)

    def jitter(name: str, arr: np.ndarray) -> np.ndarray:
        if name in BIAS_BLOCKS:
            return rng.normal(0.0, 0.5, size=arr.shape)
        return np.array(arr, copy=True)

    params = params.with_blocks([b.map(jitter) for b in params.blocks])
    config = SynthConfig(dims=dims, persons_min=M, persons_max=M, seed=seed, count=1)
    return params, generate(config)[0].frame
