"""
Ablation runs: the tied / untied / gated-tied / gated-untied variant matrix and the gate
penalty sweep.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

from .interfaces import CheckpointStore
from .models import EpochMetrics, EvaluationReport, LossBreakdown, MetricsHistory, TrainConfig
from .params import Checkpoint, ModelParams
from .storage.memory_store import MemoryStore
from .trainer import Dataset, EpochCallback, Trainer, evaluate

logger = logging.getLogger(__name__)

VARIANTS: Dict[str, Tuple[str, bool]] = {
    "tied": ("tied", False),
    "untied": ("untied", False),
    "gated-tied": ("tied", True),
    "gated-untied": ("untied", True),
}


def variant_config(base: TrainConfig, variant: str) -> TrainConfig:
    mode, gated = VARIANTS[variant]
    return base.model_copy(update={"mode": mode, "gated": gated})


def run_ablation(
    train_set: Dataset,
    val_set: Optional[Dataset],
    base_config: TrainConfig,
    store: Optional[CheckpointStore] = None,
    variants: Sequence[str] = tuple(VARIANTS),
    on_epoch: Optional[EpochCallback] = None,
) -> Tuple[MetricsHistory, MetricsHistory]:
    """
    Train every variant from the same seed and evaluate each on ``val_set``.

    Trained variants are kept in ``store`` (an in-memory store by default) under their
    variant name.

    Returns:
        One ``eval`` entry per variant, in variant order, and the full training history
    """
    store = store if store is not None else MemoryStore()
    eval_set = val_set if val_set is not None else train_set
    rows: MetricsHistory = []
    history: MetricsHistory = []
    for variant in variants:
        config = variant_config(base_config, variant)
        trainer = Trainer(config, variant=variant, on_epoch=on_epoch)
        params, variant_history = trainer.fit(train_set, val=eval_set)
        history.extend(variant_history)
        store.save_checkpoint(
            Checkpoint(
                params=params,
                T=config.T,
                velocity=trainer.velocity,
                train_config=config.model_dump(by_alias=True),
                seed=config.seed,
                rng_state=trainer.rng_state,
            ),
            variant,
        )
        final_loss = variant_history[-1].loss if variant_history else LossBreakdown()
        report = evaluate(params, eval_set, config.T)
        rows.append(
            EpochMetrics(
                variant=variant,
                phase="eval",
                epoch=len(variant_history),
                loss=final_loss,
                evaluation=report,
            )
        )
        final = report.at(config.T)
        logger.info(
            f"Ablation {variant}: scene@T={final.scene_accuracy:.4f} "
            f"person@T={final.person_accuracy:.4f}"
        )
    return rows, history


def lambda_sweep(
    train_set: Dataset,
    val_set: Optional[Dataset],
    base_config: TrainConfig,
    lambdas: Sequence[float],
    params: Optional[ModelParams] = None,
) -> Dict[float, EvaluationReport]:
    """
    Train the predictors once with gates fixed to 1, then retrain only the gates from that
    shared starting point for every penalty coefficient in ``lambdas``.
    """
    eval_set = val_set if val_set is not None else train_set
    config = base_config.model_copy(update={"gated": True})
    if params is None:
        predictor_config = config.model_copy(update={"phase": "predictors-only"})
        params, _ = Trainer(predictor_config, variant="predictors").fit(train_set, val=eval_set)
    if not params.gated:
        params = params.model_copy(update={"gated": True})
    reports: Dict[float, EvaluationReport] = {}
    for lambda_ in lambdas:
        gate_config = config.model_copy(update={"phase": "gates-only", "lambda_": lambda_})
        trained, _ = Trainer(gate_config, variant=f"lambda={lambda_}").fit(
            train_set, val=eval_set, params=params.copy()
        )
        report = evaluate(trained, eval_set, config.T)
        reports[lambda_] = report
        logger.info(f"lambda={lambda_}: mean pp gate at T={report.at(config.T).mean_gate_pp:.4f}")
    return reports
