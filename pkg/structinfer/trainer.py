"""
Mini-batch training and evaluation of the inference machine.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidArgumentError,
    MissingLabelsError,
)
from .gradients import backward
from .inference import forward
from .losses import loss
from .models import (
    Dims,
    EpochMetrics,
    EvaluationReport,
    FrameInstance,
    LossBreakdown,
    MetricsHistory,
    SynthInstance,
    TimestepMetrics,
    TrainConfig,
)
from .optim import sgd_step
from .params import Gradients, ModelParams, ParamBlockSet, init_params
from .validation import validate_instance

logger = logging.getLogger(__name__)

Dataset = Sequence[Union[FrameInstance, SynthInstance]]
EpochCallback = Callable[[EpochMetrics], None]


def split_dataset(
    dataset: Dataset,
) -> Tuple[List[FrameInstance], List[Optional[List[bool]]]]:
    """Separate frames from the relevance flags that synthetic instances carry."""
    frames: List[FrameInstance] = []
    relevance: List[Optional[List[bool]]] = []
    for item in dataset:
        if isinstance(item, SynthInstance):
            frames.append(item.frame)
            relevance.append(item.relevance)
        else:
            frames.append(item)
            relevance.append(None)
    return frames, relevance


def _check_dataset(frames: Sequence[FrameInstance], dims: Dims, what: str) -> None:
    if not frames:
        raise InvalidArgumentError(f"The {what} set is empty")
    for index, inst in enumerate(frames):
        if inst.person_unaries.shape[1] != dims.A or inst.scene_unary.shape[0] != dims.S:
            raise DimensionMismatchError(
                f"{what} instance {index} has A={inst.person_unaries.shape[1]}, "
                f"S={inst.scene_unary.shape[0]}; expected A={dims.A}, S={dims.S}"
            )
        validate_instance(inst, dims)
        if not inst.is_labeled:
            raise MissingLabelsError(f"{what} instance {index} is unlabeled")


def infer_dims(dataset: Dataset) -> Dims:
    frames, _ = split_dataset(dataset)
    if not frames:
        raise InvalidArgumentError("Cannot infer dimensions from an empty dataset")
    first = frames[0]
    return Dims(A=int(first.person_unaries.shape[1]), S=int(first.scene_unary.shape[0]))


def batch_loss_and_gradients(
    params: ModelParams,
    batch: Sequence[FrameInstance],
    config: TrainConfig,
    gated: Optional[bool] = None,
    executor: Optional[ThreadPoolExecutor] = None,
) -> Tuple[LossBreakdown, Gradients]:
    """
    Summed loss and gradient over a batch.

    Per-instance results may be computed on ``executor``; they are always reduced in batch
    order, so the outcome does not depend on the number of workers.
    """

    def one(inst: FrameInstance) -> Tuple[LossBreakdown, Gradients]:
        return backward(params, inst, config, gated=gated)

    if executor is not None and len(batch) > 1:
        results = list(executor.map(one, batch))
    else:
        results = [one(inst) for inst in batch]

    total = LossBreakdown()
    accum = [{name: np.zeros_like(arr) for name, arr in b.arrays()} for b in params.blocks]
    for breakdown, grads in results:
        total = total + breakdown
        for k, name, arr in grads.iter_arrays():
            accum[k][name] += arr
    return total, params.with_blocks([ParamBlockSet(**values) for values in accum])


def mean_loss(
    params: ModelParams,
    dataset: Dataset,
    T: int,
    lambda_: float,
    gated: Optional[bool] = None,
) -> LossBreakdown:
    """Per-frame average of the loss breakdown over a labeled dataset."""
    frames, _ = split_dataset(dataset)
    _check_dataset(frames, params.dims, "evaluation")
    total = LossBreakdown()
    for inst in frames:
        total = total + loss(forward(params, inst, T, gated=gated), lambda_)
    return total.scaled(1.0 / len(frames))


def _mean_or_nan(total: float, count: int) -> float:
    return total / count if count else float("nan")


def evaluate(
    params: ModelParams,
    dataset: Dataset,
    T: int,
    gated: Optional[bool] = None,
    threads: int = 1,
) -> EvaluationReport:
    """
    Accuracy and gate statistics at every step ``t`` in ``[1, T]``.

    Args:
        params: Model parameters
        dataset: Labeled frames, optionally with relevance flags
        T: Number of inference steps
        gated: Overrides ``params.gated``
        threads: Worker threads for the forward passes; results do not depend on it

    Returns:
        Per-step scene accuracy, person accuracy over all persons, mean person-person and
        person-scene edge gates, the unary baseline and (when relevance is known) the mean
        person-person gate on relevant-relevant versus distractor-incident edges

    Raises:
        InvalidArgumentError: If the dataset is empty
        MissingLabelsError: If a frame is unlabeled
    """
    frames, relevance = split_dataset(dataset)
    _check_dataset(frames, params.dims, "evaluation")
    params.check(T)

    scene_hits = np.zeros(T)
    person_hits = np.zeros(T)
    gate_pp_sum = np.zeros(T)
    gate_ps_sum = np.zeros(T)
    rel_sum = np.zeros(T)
    dis_sum = np.zeros(T)
    pp_edges = ps_edges = rel_edges = dis_edges = 0
    persons = 0
    unary_scene = unary_person = 0

    def run(inst: FrameInstance):
        return forward(params, inst, T, gated=gated)

    if threads > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(run, frames))
    else:
        traces = [run(inst) for inst in frames]

    for inst, flags, trace in zip(frames, relevance, traces):
        M = inst.M
        persons += M
        ps_edges += M
        upper = np.triu_indices(M, k=1)
        pp_edges += len(upper[0])
        unary_scene += int(np.argmax(inst.scene_unary) == inst.scene_label)
        unary_person += int(np.sum(np.argmax(inst.person_unaries, axis=1) == inst.action_labels))

        if flags is not None:
            rel = np.asarray(flags, dtype=bool)
            both = rel[upper[0]] & rel[upper[1]]
            rel_edges += int(np.sum(both))
            dis_edges += int(np.sum(~both))

        for t, (state, preds) in enumerate(zip(trace.states, trace.preds)):
            scene_hits[t] += int(np.argmax(preds.c_s) == inst.scene_label)
            person_hits[t] += int(np.sum(np.argmax(preds.c_p, axis=1) == inst.action_labels))
            edge_values = state.gate_pp[upper]
            gate_pp_sum[t] += float(np.sum(edge_values))
            gate_ps_sum[t] += float(np.sum(state.gate_ps))
            if flags is not None:
                rel_sum[t] += float(np.sum(edge_values[both]))
                dis_sum[t] += float(np.sum(edge_values[~both]))

    n = len(frames)
    timesteps = [
        TimestepMetrics(
            timestep=t + 1,
            scene_accuracy=scene_hits[t] / n,
            person_accuracy=person_hits[t] / persons,
            mean_gate_pp=_mean_or_nan(gate_pp_sum[t], pp_edges),
            mean_gate_ps=_mean_or_nan(gate_ps_sum[t], ps_edges),
            gate_pp_relevant=_mean_or_nan(rel_sum[t], rel_edges) if rel_edges else None,
            gate_pp_distractor=_mean_or_nan(dis_sum[t], dis_edges) if dis_edges else None,
        )
        for t in range(T)
    ]
    return EvaluationReport(
        timesteps=timesteps,
        unary_scene_accuracy=unary_scene / n,
        unary_person_accuracy=unary_person / persons,
        instances=n,
    )


class Trainer:
    """
    Runs the configured phase schedule over a labeled dataset.

    ``predictors-only`` trains message and prediction weights with every gate fixed to 1;
    ``gates-only`` trains only the gate weights with gates imposed; ``joint`` trains
    everything. ``two-phase`` runs predictors-only and then gates-only. Momentum is reset
    at every phase boundary.
    """

    def __init__(
        self,
        config: TrainConfig,
        variant: str = "model",
        on_epoch: Optional[EpochCallback] = None,
    ) -> None:
        self.config = config
        self.variant = variant
        self.on_epoch = on_epoch
        self.logger = logging.getLogger(__name__)
        self.velocity: Optional[ModelParams] = None
        self.rng_state: Optional[Dict[str, Any]] = None

    def _phase_gating(self, phase: str) -> Optional[bool]:
        return False if phase == "predictors-only" else None

    def fit(
        self,
        dataset: Dataset,
        val: Optional[Dataset] = None,
        params: Optional[ModelParams] = None,
        rng_state: Optional[Dict[str, Any]] = None,
    ) -> Tuple[ModelParams, MetricsHistory]:
        """
        Train and return the final parameters with one metrics entry per epoch.

        The shuffling generator's final state is kept in ``self.rng_state``; passing it back
        as ``rng_state`` continues the same epoch order.

        Args:
            dataset: Labeled training frames
            val: Frames evaluated after every epoch; defaults to the training set
            params: Starting parameters; drawn from ``config.seed`` when omitted
            rng_state: Bit-generator state replacing the one seeded from ``config.seed``

        Raises:
            InvalidArgumentError: If the dataset is empty
            DimensionMismatchError: If frames disagree on ``A`` or ``S``
            MissingLabelsError: If a frame is unlabeled
        """
        config = self.config
        frames, _ = split_dataset(dataset)
        dims = params.dims if params is not None else infer_dims(dataset)
        _check_dataset(frames, dims, "training")
        eval_set = val if val is not None else dataset
        _check_dataset(split_dataset(eval_set)[0], dims, "validation")

        if params is None:
            params = init_params(dims, config.T, config.mode, config.gated, config.seed)
        params.check(config.T)

        self.logger.info(
            f"[{self.variant}] Training on {len(frames)} frames: T={config.T}, mode={config.mode}, "
            f"gated={params.gated}, phases={config.phases()}"
        )
        rng = np.random.default_rng(config.seed)
        if rng_state is not None:
            try:
                rng.bit_generator.state = rng_state
            except (TypeError, ValueError, KeyError) as e:
                raise ConfigurationError(f"Unusable generator state: {e}")
        history: MetricsHistory = []
        executor = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
        try:
            for phase in config.phases():
                phase_config = config.model_copy(update={"phase": phase})
                gated = self._phase_gating(phase)
                self.velocity = None
                for epoch in range(1, config.epochs_for(phase) + 1):
                    order = rng.permutation(len(frames))
                    epoch_loss = LossBreakdown()
                    for start in range(0, len(order), config.batch_size):
                        batch = [frames[i] for i in order[start : start + config.batch_size]]
                        batch_loss, grads = batch_loss_and_gradients(
                            params, batch, phase_config, gated=gated, executor=executor
                        )
                        epoch_loss = epoch_loss + batch_loss
                        mean_grads = grads.with_blocks(
                            [b.map(lambda _, g: g / len(batch)) for b in grads.blocks]
                        )
                        params, self.velocity = sgd_step(
                            params,
                            mean_grads,
                            self.velocity,
                            config.learning_rate,
                            config.momentum,
                        )
                    report = evaluate(
                        params, eval_set, config.T, gated=gated, threads=config.threads
                    )
                    metrics = EpochMetrics(
                        variant=self.variant,
                        phase=phase,
                        epoch=epoch,
                        loss=epoch_loss.scaled(1.0 / len(frames)),
                        evaluation=report,
                    )
                    history.append(metrics)
                    final = report.at(config.T)
                    self.logger.info(
                        f"[{self.variant}] {phase} epoch {epoch}: loss={metrics.loss.total:.4f} "
                        f"scene@T={final.scene_accuracy:.4f} person@T={final.person_accuracy:.4f}"
                    )
                    if self.on_epoch is not None:
                        self.on_epoch(metrics)
        finally:
            if executor is not None:
                executor.shutdown(wait=True)
        self.rng_state = rng.bit_generator.state
        return params, history


def train(
    dataset: Dataset,
    config: TrainConfig,
    val: Optional[Dataset] = None,
    params: Optional[ModelParams] = None,
    variant: str = "model",
    on_epoch: Optional[EpochCallback] = None,
) -> Tuple[ModelParams, MetricsHistory]:
    """Train with a fresh :class:`Trainer`; see :meth:`Trainer.fit`."""
    return Trainer(config, variant=variant, on_epoch=on_epoch).fit(dataset, val=val, params=params)
