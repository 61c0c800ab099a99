import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    computed_field,
    field_validator,
    model_validator,
)

from .exceptions import ConfigurationError, InstanceValidationError

WeightMode = Literal["tied", "untied"]
Phase = Literal["joint", "predictors-only", "gates-only", "two-phase"]


class Dims(BaseModel):
    """Problem dimensions: number of action classes ``A`` and scene classes ``S``."""

    model_config = ConfigDict(frozen=True)

    A: int
    S: int

    @field_validator("A", "S")
    @classmethod
    def _at_least_two(cls, value: int) -> int:
        if value < 2:
            raise ConfigurationError(f"Class counts must be at least 2, got {value}")
        return value


def _as_readonly(values, dtype, ndim: int, field: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=dtype)
    except (ValueError, TypeError) as e:
        raise InstanceValidationError(f"{field}: wrong vector length ({e})")
    if arr.ndim != ndim:
        raise InstanceValidationError(
            f"{field}: expected a {ndim}-dimensional array, got shape {arr.shape}"
        )
    arr.setflags(write=False)
    return arr


def _integral_labels(values, field: str) -> np.ndarray:
    """Labels as int64, refusing values that would be truncated."""
    try:
        raw = np.asarray(values)
    except (ValueError, TypeError) as e:
        raise InstanceValidationError(f"{field}: wrong vector length ({e})")
    if raw.dtype == np.bool_ or not np.issubdtype(raw.dtype, np.number):
        raise InstanceValidationError(f"{field}: labels must be integers, got {raw.dtype}")
    if not np.issubdtype(raw.dtype, np.integer) and not np.all(np.mod(raw, 1) == 0):
        raise InstanceValidationError(f"{field}: labels must be integers, got {values!r}")
    return raw.astype(np.int64)


class FrameInstance(BaseModel):
    """
    One scene: the scene unary distribution, one unary distribution per person and the
    optional ground-truth labels.

    Arrays are copied on construction and marked read-only.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scene_unary: np.ndarray
    person_unaries: np.ndarray
    scene_label: Optional[int] = None
    action_labels: Optional[np.ndarray] = None

    @field_validator("scene_unary", mode="before")
    @classmethod
    def _coerce_scene(cls, value) -> np.ndarray:
        return _as_readonly(value, np.float64, 1, "scene_unary")

    @field_validator("person_unaries", mode="before")
    @classmethod
    def _coerce_persons(cls, value) -> np.ndarray:
        return _as_readonly(value, np.float64, 2, "person_unaries")

    @field_validator("scene_label", mode="before")
    @classmethod
    def _coerce_scene_label(cls, value) -> Optional[int]:
        if value is None:
            return None
        label = _integral_labels(value, "scene_label")
        if label.ndim != 0:
            raise InstanceValidationError(f"scene_label: expected a single integer, got {value!r}")
        return int(label)

    @field_validator("action_labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value) -> Optional[np.ndarray]:
        if value is None:
            return None
        return _as_readonly(_integral_labels(value, "action_labels"), np.int64, 1, "action_labels")

    @property
    def M(self) -> int:
        """Number of persons in the frame."""
        return int(self.person_unaries.shape[0])

    @property
    def is_labeled(self) -> bool:
        return self.scene_label is not None and self.action_labels is not None

    def permuted(self, order) -> "FrameInstance":
        """Return the same frame with persons reordered so that new person k is old order[k]."""
        order = np.asarray(order, dtype=np.int64)
        return FrameInstance(
            scene_unary=self.scene_unary,
            person_unaries=self.person_unaries[order],
            scene_label=self.scene_label,
            action_labels=None if self.action_labels is None else self.action_labels[order],
        )


class SynthInstance(BaseModel):
    """A frame plus per-person relevance flags (True = takes part in the group activity)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frame: FrameInstance
    relevance: Optional[List[bool]] = None


class SynthConfig(BaseModel):
    """Knobs of the synthetic group-activity generator."""

    model_config = ConfigDict(frozen=True)

    dims: Dims
    persons_min: int = 4
    persons_max: int = 8
    distractor_rate: float = 0.3
    unary_noise: float = 2.0
    scene_noise: Optional[float] = None
    correlation: float = 0.9
    seed: int = 0
    count: int = 100

    @field_validator("distractor_rate", "correlation")
    @classmethod
    def _probability(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ConfigurationError(f"Probabilities must lie in [0, 1], got {value}")
        return value

    @field_validator("unary_noise", "scene_noise")
    @classmethod
    def _positive_concentration(
        cls, value: Optional[float], info: ValidationInfo
    ) -> Optional[float]:
        if value is not None and not value > 0.0:
            raise ConfigurationError(f"{info.field_name} must be positive, got {value}")
        return value

    @field_validator("count")
    @classmethod
    def _positive_count(cls, value: int) -> int:
        if value < 1:
            raise ConfigurationError(f"count must be at least 1, got {value}")
        return value

    @model_validator(mode="after")
    def _person_range(self) -> "SynthConfig":
        if self.persons_min < 1:
            raise ConfigurationError(f"persons_min must be at least 1, got {self.persons_min}")
        if self.persons_min > self.persons_max:
            raise ConfigurationError(
                f"persons_min ({self.persons_min}) exceeds persons_max ({self.persons_max})"
            )
        return self


class TrainConfig(BaseModel):
    """Hyperparameters and schedule of one training run."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    T: int = 3
    mode: WeightMode = "tied"
    gated: bool = True
    lambda_: float = Field(default=0.01, alias="lambda")
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 10
    gate_epochs: Optional[int] = None
    batch_size: int = 32
    seed: int = 7
    phase: Phase = "two-phase"
    freeze_biases: bool = False
    threads: int = 1

    @field_validator("T", "epochs", "batch_size", "threads")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ConfigurationError(f"Expected a positive integer, got {value}")
        return value

    @field_validator("gate_epochs")
    @classmethod
    def _positive_or_none(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ConfigurationError(f"gate_epochs must be positive, got {value}")
        return value

    @field_validator("lambda_")
    @classmethod
    def _nonnegative_lambda(cls, value: float) -> float:
        if not value >= 0.0:
            raise ConfigurationError(f"lambda must be >= 0, got {value}")
        return value

    @field_validator("learning_rate")
    @classmethod
    def _nonnegative_rate(cls, value: float) -> float:
        # zero is allowed and leaves every weight untouched
        if not (value >= 0.0 and math.isfinite(value)):
            raise ConfigurationError(f"learning_rate must be finite and >= 0, got {value}")
        return value

    @field_validator("momentum")
    @classmethod
    def _momentum_range(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {value}")
        return value

    def phases(self) -> List[str]:
        """Expand the schedule into the concrete list of phases to run."""
        if self.phase != "two-phase":
            return [self.phase]
        if not self.gated:
            return ["predictors-only"]
        return ["predictors-only", "gates-only"]

    def epochs_for(self, phase: str) -> int:
        if phase == "gates-only" and self.gate_epochs is not None:
            return self.gate_epochs
        return self.epochs


class LossBreakdown(BaseModel):
    """Loss components of one instance or a sum over instances."""

    ce_scene: float = 0.0
    ce_person: float = 0.0
    gate_l1: float = 0.0

    @computed_field  # type: ignore[misc]
    @property
    def total(self) -> float:
        return self.ce_scene + self.ce_person + self.gate_l1

    def __add__(self, other: "LossBreakdown") -> "LossBreakdown":
        return LossBreakdown(
            ce_scene=self.ce_scene + other.ce_scene,
            ce_person=self.ce_person + other.ce_person,
            gate_l1=self.gate_l1 + other.gate_l1,
        )

    def scaled(self, factor: float) -> "LossBreakdown":
        return LossBreakdown(
            ce_scene=self.ce_scene * factor,
            ce_person=self.ce_person * factor,
            gate_l1=self.gate_l1 * factor,
        )


class TimestepMetrics(BaseModel):
    """Accuracies and gate statistics at one inference step."""

    timestep: int
    scene_accuracy: float
    person_accuracy: float
    mean_gate_pp: float
    mean_gate_ps: float
    gate_pp_relevant: Optional[float] = None
    gate_pp_distractor: Optional[float] = None


class EvaluationReport(BaseModel):
    """Output of :func:`structinfer.trainer.evaluate`."""

    timesteps: List[TimestepMetrics]
    unary_scene_accuracy: float
    unary_person_accuracy: float
    instances: int

    def at(self, t: int) -> TimestepMetrics:
        return self.timesteps[t - 1]


class EpochMetrics(BaseModel):
    """One row group of the metrics table: a variant's state after an epoch."""

    variant: str
    phase: str
    epoch: int
    loss: LossBreakdown
    evaluation: EvaluationReport


class GateRecord(BaseModel):
    """One exported edge gate."""

    instance: int
    timestep: int
    edge_kind: Literal["pp", "ps"]
    node_a: int
    node_b: Optional[int]
    gate: float
    category: str


MetricsHistory = List[EpochMetrics]


class DatasetFile(BaseModel):
    """Contents of a dataset file: the header dimensions and every record."""

    dims: Dims
    instances: List[SynthInstance]
    format_version: int = 1

    @property
    def frames(self) -> List[FrameInstance]:
        return [inst.frame for inst in self.instances]
