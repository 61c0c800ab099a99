"""
Shared fixtures for the structinfer test-suite.
"""

import numpy as np
import pytest

from structinfer.cli.common import load_preset
from structinfer.config import PACKAGED_PRESETS_DIR
from structinfer.models import Dims, FrameInstance, SynthConfig, TrainConfig
from structinfer.params import init_params
from structinfer.synth import generate


@pytest.fixture
def dims():
    """The dimensions used by the gradient checks: A=5 actions, S=4 scenes."""
    return Dims(A=5, S=4)


@pytest.fixture
def make_frame(dims):
    """Factory for a seeded labeled frame with exactly ``M`` persons."""

    def _make(M: int = 4, seed: int = 0, problem: Dims = None) -> FrameInstance:
        problem = problem or dims
        config = SynthConfig(dims=problem, persons_min=M, persons_max=M, seed=seed, count=1)
        return generate(config)[0].frame

    return _make


@pytest.fixture
def frame(make_frame):
    return make_frame(M=4, seed=3)


@pytest.fixture
def gated_params(dims):
    return init_params(dims, T=3, mode="tied", gated=True, seed=11)


@pytest.fixture
def small_dataset(dims):
    """A dozen labeled synthetic frames with relevance flags."""
    return generate(SynthConfig(dims=dims, persons_min=2, persons_max=5, seed=5, count=12))


@pytest.fixture
def fast_config():
    return TrainConfig(
        T=2,
        mode="tied",
        gated=True,
        lambda_=0.01,
        learning_rate=0.05,
        momentum=0.9,
        epochs=1,
        batch_size=4,
        seed=3,
        phase="joint",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def reference_synth_config():
    """Generator settings of the packaged reference preset, training and held-out frames."""
    section = load_preset(PACKAGED_PRESETS_DIR / "reference.yml")["generate"]
    return SynthConfig(
        dims=Dims(A=section["actions"], S=section["scenes"]),
        persons_min=section["persons_min"],
        persons_max=section["persons_max"],
        distractor_rate=section["distractor_rate"],
        correlation=section["correlation"],
        unary_noise=section["noise"],
        scene_noise=section["scene_noise"],
        seed=section["seed"],
        count=section["count"] + section["test_count"],
    )
