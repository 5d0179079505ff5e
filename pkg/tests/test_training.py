import math

import numpy as np
import pytest
import torch

from network.model import NetworkSpec, build_decoder_network
from network.training import (
    ClassWeightTracker,
    TrainConfig,
    adamw_step,
    build_optimizer,
    class_weights,
    onecycle_lr,
    train,
    training_batch,
    weighted_ce,
)
from qec.noise import NoiseModel


def test_class_weights_direct_substitution():
    tracker = ClassWeightTracker(2, smoothing=0.0)
    weights = class_weights(tracker, np.array([0, 0, 0, 1]))
    assert weights == pytest.approx([4 / 6, 2.0])


def test_class_weights_uniform_counts():
    tracker = ClassWeightTracker(4, smoothing=0.0)
    weights = class_weights(tracker, np.array([0, 1, 2, 3, 3, 2, 1, 0]))
    assert weights == pytest.approx([1.0] * 4)


def test_class_weights_accumulate_across_batches():
    tracker = ClassWeightTracker(2, smoothing=0.0)
    class_weights(tracker, np.array([0, 0]))
    weights = class_weights(tracker, np.array([0, 1]))
    assert tracker.seen == 4
    assert weights == pytest.approx([4 / 6, 2.0])


def test_unseen_class_gets_largest_finite_weight():
    tracker = ClassWeightTracker(64)
    weights = class_weights(tracker, np.array([0, 0, 1, 5]))
    assert np.all(np.isfinite(weights))
    assert weights[2] == weights.max()
    assert weights[0] < weights[1]


def test_weighted_ce_closed_form():
    loss = weighted_ce(torch.tensor([[0.5, 0.5]]), torch.tensor([0]), torch.ones(2))
    assert loss.item() == pytest.approx(math.log(2), abs=1e-6)


def test_weighted_ce_reduces_to_cross_entropy():
    pred = torch.softmax(torch.randn(5, 8), dim=-1)
    labels = torch.tensor([0, 3, 7, 2, 2])
    expected = torch.nn.functional.nll_loss(torch.log(pred), labels)
    assert weighted_ce(pred, labels, torch.ones(8)).item() == pytest.approx(expected.item(), abs=1e-6)


def test_weighted_ce_perfect_prediction():
    pred = torch.eye(4)
    assert weighted_ce(pred, torch.arange(4), torch.full((4,), 3.0)).item() == pytest.approx(0.0, abs=1e-6)


def test_onecycle_shape():
    total, max_lr = 1000, 0.1
    peak = int(0.3 * total) - 1
    assert onecycle_lr(0, total, max_lr) < max_lr
    assert onecycle_lr(0, total, max_lr) == pytest.approx(max_lr / 25)
    assert onecycle_lr(peak, total, max_lr) == pytest.approx(max_lr)
    lrs = [onecycle_lr(s, total, max_lr) for s in range(total)]
    assert max(lrs) == pytest.approx(max_lr)
    assert all(a <= b for a, b in zip(lrs[:peak], lrs[1:peak + 1]))
    assert all(a >= b for a, b in zip(lrs[peak:], lrs[peak + 1:]))
    assert lrs[-1] == pytest.approx(max_lr / 25 / 1e4)


def test_adamw_zero_gradient_leaves_parameters():
    param = torch.nn.Parameter(torch.tensor([1.5, -2.0]))
    optimizer = build_optimizer([param], TrainConfig(weight_decay=0.0, batch_size=1, total_samples=1))
    param.grad = torch.zeros_like(param)
    adamw_step(optimizer, 0.1)
    assert torch.equal(param.detach(), torch.tensor([1.5, -2.0]))


def test_adamw_quadratic_descends_monotonically():
    x = torch.nn.Parameter(torch.tensor(0.0, dtype=torch.float64))
    config = TrainConfig(max_lr=0.01, weight_decay=0.0, batch_size=1, total_samples=200)
    optimizer = build_optimizer([x], config)
    losses = []
    for step in range(200):
        optimizer.zero_grad()
        loss = (x - 3.0) ** 2
        loss.backward()
        adamw_step(optimizer, onecycle_lr(step, 200, config.max_lr))
        losses.append(loss.item())
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_train_config_invariants():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=10, total_samples=5)
    with pytest.raises(ValueError):
        TrainConfig(max_lr=0.0)


def test_training_batches_are_reproducible(code2d):
    a = training_batch(code2d, NoiseModel(0.1), seed=1, step=3, batch_size=16)
    b = training_batch(code2d, NoiseModel(0.1), seed=1, step=3, batch_size=16)
    c = training_batch(code2d, NoiseModel(0.1), seed=1, step=4, batch_size=16)
    assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])
    assert not torch.equal(a[0], c[0])


def test_training_is_deterministic(code2d):
    config = TrainConfig(batch_size=32, total_samples=96, seed=7, log_every=1)
    spec = NetworkSpec(dim=2, channels=(8, 8), depth=2)
    runs = []
    for _ in range(2):
        model = build_decoder_network(code2d, spec, seed=0)
        result = train(model, 0.1, config)
        runs.append((result, model))
    (first, model_a), (second, model_b) = runs
    assert len(first.losses) == 3
    assert first.losses == second.losses
    for pa, pb in zip(model_a.parameters(), model_b.parameters()):
        assert torch.equal(pa, pb)
    assert first.samples == 96
    assert not model_a.training


def test_weighted_ce_gradcheck():
    torch.manual_seed(5)
    logits = torch.randn(6, 16, dtype=torch.float64, requires_grad=True)
    labels = torch.tensor([0, 3, 15, 3, 7, 1])
    weights = torch.rand(16, dtype=torch.float64) + 0.5
    assert torch.autograd.gradcheck(
        lambda z: weighted_ce(torch.softmax(z, dim=-1), labels, weights), (logits,), eps=1e-6, atol=1e-5, rtol=1e-3
    )
