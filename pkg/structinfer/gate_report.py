import logging
from typing import Iterator, List, Sequence

from .exceptions import InvalidArgumentError
from .inference import InferenceTrace, forward
from .models import FrameInstance, GateRecord
from .params import ModelParams
from .topology import build_topology

logger = logging.getLogger(__name__)

IRRELEVANT_BELOW = 0.2
USEFUL_ABOVE = 0.7


def categorize_gate(
    gate: float, irrelevant_below: float = IRRELEVANT_BELOW, useful_above: float = USEFUL_ABOVE
) -> str:
    """``irrelevant`` below the lower threshold, ``useful`` above the upper, else ``ambiguous``."""
    if gate < irrelevant_below:
        return "irrelevant"
    if gate > useful_above:
        return "useful"
    return "ambiguous"


def gate_records(
    trace: InferenceTrace,
    instance: int,
    irrelevant_below: float = IRRELEVANT_BELOW,
    useful_above: float = USEFUL_ABOVE,
) -> List[GateRecord]:
    """One record per edge per step: person pairs ``i < j`` first, then scene edges."""
    topology = build_topology(trace.instance.M)
    records: List[GateRecord] = []
    for t, state in enumerate(trace.states, start=1):
        for i, j in topology.person_edges:
            gate = float(state.gate_pp[i, j])
            records.append(
                GateRecord(
                    instance=instance,
                    timestep=t,
                    edge_kind="pp",
                    node_a=i,
                    node_b=j,
                    gate=gate,
                    category=categorize_gate(gate, irrelevant_below, useful_above),
                )
            )
        for i in topology.scene_edges:
            gate = float(state.gate_ps[i])
            records.append(
                GateRecord(
                    instance=instance,
                    timestep=t,
                    edge_kind="ps",
                    node_a=i,
                    node_b=None,
                    gate=gate,
                    category=categorize_gate(gate, irrelevant_below, useful_above),
                )
            )
    return records


def export_gates(
    params: ModelParams,
    frames: Sequence[FrameInstance],
    T: int,
    irrelevant_below: float = IRRELEVANT_BELOW,
    useful_above: float = USEFUL_ABOVE,
) -> Iterator[GateRecord]:
    """
    Iterate over the edge gates of every frame at each step; arguments are checked eagerly.

    Raises:
        InvalidArgumentError: If the thresholds are not ordered
    """
    if not 0.0 <= irrelevant_below <= useful_above <= 1.0:
        raise InvalidArgumentError(
            f"Gate thresholds must satisfy 0 <= {irrelevant_below} <= {useful_above} <= 1"
        )
    params.check(T)
    return _iter_records(params, frames, T, irrelevant_below, useful_above)


def _iter_records(
    params: ModelParams,
    frames: Sequence[FrameInstance],
    T: int,
    irrelevant_below: float,
    useful_above: float,
) -> Iterator[GateRecord]:
    for index, frame in enumerate(frames):
        trace = forward(params, frame, T)
        yield from gate_records(trace, index, irrelevant_below, useful_above)
