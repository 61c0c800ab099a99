"""
Synthetic group-activity frames.

Every frame has a latent group activity. Relevant persons mostly perform the action that
defines it; distractors act at random. Unaries are noisy distributions peaked at each
person's true action, so the scene label is recoverable only by pooling the relevant
persons and discounting the distractors.

Action ``a`` defines scene ``a`` for ``a < min(A, S)``; any further action classes never
define a scene.
"""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from .exceptions import InvalidArgumentError
from .models import FrameInstance, SynthConfig, SynthInstance

logger = logging.getLogger(__name__)

CORRUPT_CONCENTRATION = 50.0


def noisy_peak(
    index: int, size: int, concentration: float, rng: np.random.Generator
) -> np.ndarray:
    """
    A Dirichlet draw whose parameter is 1 everywhere plus ``concentration`` at ``index``.

    The expected mass at ``index`` is ``(1 + c) / (size + c)``; small concentrations often
    put the largest mass on another class. An infinite concentration returns the exact
    one-hot.
    """
    peak = np.zeros(size)
    peak[index] = 1.0
    if np.isinf(concentration):
        return peak
    draw = rng.dirichlet(1.0 + concentration * peak)
    return draw / np.sum(draw)


def majority_label(
    actions: Sequence[int],
    relevance: Optional[Sequence[bool]],
    S: int,
    fallback: int,
) -> int:
    """
    Scene label by majority over the relevant persons' scene-defining actions.

    Ties go to the lowest class index. With no relevant scene-defining action the vote runs
    over all persons, and with none at all ``fallback`` is returned.
    """
    actions = np.asarray(actions, dtype=np.int64)
    voters = actions
    if relevance is not None:
        voters = actions[np.asarray(relevance, dtype=bool)]
    voters = voters[voters < S]
    if voters.size == 0:
        voters = actions[actions < S]
    if voters.size == 0:
        return int(fallback)
    return int(np.argmax(np.bincount(voters, minlength=S)))


def _other_action(action: int, A: int, rng: np.random.Generator) -> int:
    choice = int(rng.integers(0, A - 1))
    return choice if choice < action else choice + 1


def _generate_one(config: SynthConfig, rng: np.random.Generator) -> SynthInstance:
    A, S = config.dims.A, config.dims.S
    M = int(rng.integers(config.persons_min, config.persons_max + 1))
    activity = int(rng.integers(0, min(A, S)))

    relevance: List[bool] = []
    actions: List[int] = []
    for _ in range(M):
        distractor = bool(rng.random() < config.distractor_rate)
        relevance.append(not distractor)
        if distractor:
            actions.append(int(rng.integers(0, A)))
        elif rng.random() < config.correlation:
            actions.append(activity)
        else:
            actions.append(_other_action(activity, A, rng))

    person_unaries = np.stack([noisy_peak(a, A, config.unary_noise, rng) for a in actions])
    scene_label = majority_label(actions, relevance, S, fallback=activity)
    scene_noise = config.unary_noise if config.scene_noise is None else config.scene_noise
    scene_unary = noisy_peak(scene_label, S, scene_noise, rng)
    frame = FrameInstance(
        scene_unary=scene_unary,
        person_unaries=person_unaries,
        scene_label=scene_label,
        action_labels=actions,
    )
    return SynthInstance(frame=frame, relevance=relevance)


def generate(config: SynthConfig) -> List[SynthInstance]:
    """
    Draw ``config.count`` labeled frames.

    Each frame uses its own generator spawned from ``config.seed``, so frame ``k`` is the
    same whatever the count or generation order.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.count)
    instances = [_generate_one(config, np.random.default_rng(child)) for child in children]
    relevant = sum(sum(inst.relevance or []) for inst in instances)
    total = sum(inst.frame.M for inst in instances)
    logger.info(
        f"Generated {len(instances)} frames with {total} persons ({relevant} relevant), "
        f"A={config.dims.A}, S={config.dims.S}, seed={config.seed}"
    )
    return instances


def corrupt(
    instances: Sequence[Union[FrameInstance, SynthInstance]], flip_rate: float, seed: int
) -> List[Union[FrameInstance, SynthInstance]]:
    """
    Replace person unaries with ones peaked at a wrong action.

    Each person is flipped independently with probability ``flip_rate``; the wrong action
    is uniform over the other classes. Labels and relevance flags are kept. The true action
    is the label when known, else the unary's argmax.

    Raises:
        InvalidArgumentError: If ``flip_rate`` is outside ``[0, 1]``
    """
    if not 0.0 <= flip_rate <= 1.0:
        raise InvalidArgumentError(f"flip_rate must lie in [0, 1], got {flip_rate}")
    rng = np.random.default_rng(seed)
    out: List[Union[FrameInstance, SynthInstance]] = []
    flipped = 0
    for item in instances:
        frame = item.frame if isinstance(item, SynthInstance) else item
        A = frame.person_unaries.shape[1]
        unaries = np.array(frame.person_unaries, copy=True)
        for i in range(frame.M):
            if rng.random() >= flip_rate:
                continue
            true_action = (
                int(frame.action_labels[i])
                if frame.action_labels is not None
                else int(np.argmax(unaries[i]))
            )
            unaries[i] = noisy_peak(
                _other_action(true_action, A, rng), A, CORRUPT_CONCENTRATION, rng
            )
            flipped += 1
        new_frame = FrameInstance(
            scene_unary=frame.scene_unary,
            person_unaries=unaries,
            scene_label=frame.scene_label,
            action_labels=frame.action_labels,
        )
        if isinstance(item, SynthInstance):
            out.append(SynthInstance(frame=new_frame, relevance=item.relevance))
        else:
            out.append(new_frame)
    logger.info(f"Corrupted {flipped} person unaries (flip_rate={flip_rate}, seed={seed})")
    return out