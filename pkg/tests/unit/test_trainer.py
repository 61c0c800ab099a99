"""
Tests for mini-batch training and evaluation.
"""

import math
import unittest.mock as mock
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from structinfer.exceptions import DimensionMismatchError, InvalidArgumentError, MissingLabelsError
from structinfer.models import Dims, FrameInstance, SynthConfig, SynthInstance, TrainConfig
from structinfer.gradients import backward
from structinfer.params import BIAS_BLOCKS, GATE_BLOCKS, init_params
from structinfer.synth import generate
from structinfer.trainer import (
    Trainer,
    batch_loss_and_gradients,
    evaluate,
    infer_dims,
    mean_loss,
    split_dataset,
    train,
)


def _blocks_equal(a, b, names):
    return all(
        np.array_equal(x, y)
        for (_, name, x), (_, _, y) in zip(a.iter_arrays(), b.iter_arrays())
        if name in names
    )


def test_zero_learning_rate_changes_nothing(small_dataset, fast_config, dims):
    start = init_params(dims, 2, "tied", True, seed=3)
    config = fast_config.model_copy(update={"learning_rate": 0.0, "epochs": 2})
    params, history = train(small_dataset, config, params=start.copy())
    assert params.equals(start)
    assert len(history) == 2


def test_training_is_deterministic(small_dataset, fast_config):
    a, history_a = train(small_dataset, fast_config)
    b, history_b = train(small_dataset, fast_config)
    assert a.equals(b)
    assert history_a[-1].loss.total == history_b[-1].loss.total


def test_thread_count_does_not_change_the_result(small_dataset, fast_config):
    single, _ = train(small_dataset, fast_config)
    threaded, _ = train(small_dataset, fast_config.model_copy(update={"threads": 3}))
    assert single.equals(threaded)


def test_gates_only_phase_freezes_predictors(small_dataset, fast_config, dims):
    start = init_params(dims, 2, "tied", True, seed=4)
    config = fast_config.model_copy(update={"phase": "gates-only", "lambda_": 0.1})
    params, _ = train(small_dataset, config, params=start.copy())
    non_gate = {name for _, name, _ in start.iter_arrays()} - set(GATE_BLOCKS)
    assert _blocks_equal(params, start, non_gate)
    assert not _blocks_equal(params, start, set(GATE_BLOCKS))


def test_predictors_only_phase_freezes_gates(small_dataset, fast_config, dims):
    start = init_params(dims, 2, "untied", True, seed=4)
    config = fast_config.model_copy(update={"phase": "predictors-only", "mode": "untied"})
    params, history = train(small_dataset, config, params=start.copy())
    assert _blocks_equal(params, start, set(GATE_BLOCKS))
    # gates are imposed off during this phase
    assert history[0].evaluation.at(2).mean_gate_ps == 1.0


def test_frozen_biases_stay_put(small_dataset, fast_config, dims):
    start = init_params(dims, 2, "tied", True, seed=4)
    config = fast_config.model_copy(update={"freeze_biases": True})
    params, _ = train(small_dataset, config, params=start.copy())
    assert _blocks_equal(params, start, set(BIAS_BLOCKS))


def test_two_phase_history_and_callback(small_dataset, fast_config):
    config = fast_config.model_copy(update={"phase": "two-phase", "epochs": 2, "gate_epochs": 1})
    callback = mock.MagicMock()
    trainer = Trainer(config, variant="gated-tied", on_epoch=callback)
    _, history = trainer.fit(small_dataset)
    assert [(m.phase, m.epoch) for m in history] == [
        ("predictors-only", 1),
        ("predictors-only", 2),
        ("gates-only", 1),
    ]
    assert callback.call_count == 3
    assert callback.call_args_list[0].args[0].variant == "gated-tied"
    assert trainer.velocity is not None


def test_generator_state_resumes_the_epoch_order(small_dataset, fast_config):
    # without momentum the optimizer carries no state between epochs
    config = fast_config.model_copy(update={"momentum": 0.0})
    trainer = Trainer(config)
    params, _ = trainer.fit(small_dataset)
    expected = np.random.default_rng(config.seed)
    expected.permutation(len(small_dataset))
    assert trainer.rng_state == expected.bit_generator.state

    # one epoch resumed from the saved state equals the second epoch of a two-epoch run
    resumed = Trainer(config)
    resumed_params, _ = resumed.fit(small_dataset, params=params, rng_state=trainer.rng_state)
    two_epochs = config.model_copy(update={"epochs": 2})
    straight, _ = train(small_dataset, two_epochs)
    assert resumed_params.equals(straight)


def test_loss_goes_down(dims):
    data = generate(SynthConfig(dims=dims, persons_min=3, persons_max=5, seed=2, count=40))
    config = TrainConfig(
        T=2,
        mode="tied",
        gated=True,
        lambda_=0.0,
        learning_rate=0.05,
        momentum=0.9,
        epochs=6,
        batch_size=8,
        seed=1,
        phase="joint",
    )
    _, history = train(data, config)
    assert history[-1].loss.total < history[0].loss.total


def test_batch_is_the_sum_of_its_frames(gated_params, small_dataset, fast_config):
    frames = [item.frame for item in small_dataset[:5]]
    config = fast_config.model_copy(update={"T": 3})
    total, grads = batch_loss_and_gradients(gated_params, frames, config)
    expected = [backward(gated_params, inst, config) for inst in frames]
    assert total.total == pytest.approx(sum(b.total for b, _ in expected), abs=1e-9)
    assert total.gate_l1 == pytest.approx(sum(b.gate_l1 for b, _ in expected), abs=1e-9)
    for k, name, arr in grads.iter_arrays():
        summed = sum(getattr(g.blocks[k], name) for _, g in expected)
        np.testing.assert_allclose(arr, summed, rtol=0, atol=1e-9)


def test_batch_gradient_ignores_worker_count(gated_params, small_dataset, fast_config):
    frames = [item.frame for item in small_dataset]
    single = batch_loss_and_gradients(gated_params, frames, fast_config)
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = batch_loss_and_gradients(gated_params, frames, fast_config, executor=pool)
    assert single[0] == threaded[0]
    assert single[1].equals(threaded[1])


def test_bad_datasets(fast_config, small_dataset, dims):
    with pytest.raises(InvalidArgumentError):
        train([], fast_config)
    first = small_dataset[0].frame
    unlabeled = FrameInstance(scene_unary=first.scene_unary, person_unaries=first.person_unaries)
    with pytest.raises(MissingLabelsError):
        train([unlabeled], fast_config)
    other = generate(SynthConfig(dims=Dims(A=4, S=4), seed=1, count=1))
    with pytest.raises(DimensionMismatchError):
        train(list(small_dataset) + other, fast_config)
    with pytest.raises(DimensionMismatchError):
        train(small_dataset, fast_config, val=other)


def test_split_and_infer_dims(small_dataset):
    frames, relevance = split_dataset(list(small_dataset) + [small_dataset[0].frame])
    assert len(frames) == 13
    assert relevance[-1] is None and relevance[0] == small_dataset[0].relevance
    assert infer_dims(small_dataset) == Dims(A=5, S=4)


class TestEvaluate:
    def test_one_row_per_step(self, gated_params, small_dataset):
        report = evaluate(gated_params, small_dataset, T=3)
        assert [m.timestep for m in report.timesteps] == [1, 2, 3]
        assert report.instances == 12
        for m in report.timesteps:
            assert 0.0 <= m.scene_accuracy <= 1.0
            assert 0.0 < m.mean_gate_pp < 1.0

    def test_threads_give_identical_reports(self, gated_params, small_dataset):
        single = evaluate(gated_params, small_dataset, T=2)
        threaded = evaluate(gated_params, small_dataset, T=2, threads=4)
        assert single.model_dump() == threaded.model_dump()

    def test_unary_baseline_with_exact_unaries(self, gated_params):
        config = SynthConfig(
            dims=Dims(A=5, S=4), persons_min=2, persons_max=3, unary_noise=math.inf, count=6
        )
        report = evaluate(gated_params, generate(config), T=1)
        assert report.unary_scene_accuracy == 1.0
        assert report.unary_person_accuracy == 1.0

    def test_gate_means_without_edges_or_gates(self, gated_params, make_frame):
        singles = [make_frame(M=1, seed=s) for s in range(3)]
        report = evaluate(gated_params, singles, T=1)
        assert math.isnan(report.at(1).mean_gate_pp)
        ungated = evaluate(gated_params, [make_frame(M=3, seed=1)], T=1, gated=False)
        assert ungated.at(1).mean_gate_pp == 1.0
        assert ungated.at(1).mean_gate_ps == 1.0

    def test_relevance_split(self, gated_params):
        frame = generate(
            SynthConfig(dims=Dims(A=5, S=4), persons_min=3, persons_max=3, seed=1, count=1)
        )[0].frame
        item = SynthInstance(frame=frame, relevance=[True, True, False])
        report = evaluate(gated_params, [item], T=1)
        assert report.at(1).gate_pp_relevant is not None
        assert report.at(1).gate_pp_distractor is not None

    def test_mean_loss_is_per_frame(self, gated_params, small_dataset):
        total = mean_loss(gated_params, small_dataset, T=2, lambda_=0.0)
        double = mean_loss(gated_params, list(small_dataset) * 2, T=2, lambda_=0.0)
        assert total.total == pytest.approx(double.total)

    def test_random_params_score_near_chance(self, gated_params):
        # nearly flat unaries carry almost no label information
        config = SynthConfig(
            dims=Dims(A=5, S=4),
            persons_min=2,
            persons_max=4,
            unary_noise=0.01,
            seed=8,
            count=400,
        )
        report = evaluate(gated_params, generate(config), T=2)
        for m in report.timesteps:
            assert abs(m.scene_accuracy - 1 / 4) <= 0.1
