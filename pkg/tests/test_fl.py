import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from feelsched.fl import (
    ClientDataset,
    SGDConfig,
    SoftmaxModel,
    aggregate,
    evaluate,
    load_model,
    local_sgd,
    make_synthetic_task,
    partition_noniid,
    save_model,
)


@pytest.fixture(scope="module")
def task():
    return make_synthetic_task(np.random.default_rng(0), n_classes=10, n_features=8,
                               train_per_class=400, test_per_class=200, separation=1.0)


def finite_difference_grad(model, theta, x, y, h=1e-4):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (model.loss(theta + e, x, y) - model.loss(theta - e, x, y)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    model = SoftmaxModel(n_features=6, n_classes=4)
    theta = rng.standard_normal(model.dim)
    x = rng.standard_normal((32, 6))
    y = rng.integers(0, 4, 32)
    err = np.abs(model.grad(theta, x, y) - finite_difference_grad(model, theta, x, y))
    assert err.max() < 1e-5


def test_zero_learning_rate_leaves_model(task):
    data = ClientDataset(task.x_train[:64], task.y_train[:64])
    theta = np.random.default_rng(1).standard_normal(task.model.dim)
    out = local_sgd(theta, data, SGDConfig(4, 16, 0.0), np.random.default_rng(2), task.model)
    assert np.array_equal(out, theta)


def test_full_batch_step_is_exact_gradient_step(task):
    data = ClientDataset(task.x_train[::50], task.y_train[::50])
    theta = task.model.zeros()
    out = local_sgd(theta, data, SGDConfig(1, data.size, 0.1), np.random.default_rng(0), task.model)
    assert np.allclose(out, theta - 0.1 * task.model.grad(theta, data.x, data.y))


def test_full_batch_descent(task):
    data = ClientDataset(task.x_train[::20], task.y_train[::20])
    theta = np.random.default_rng(3).standard_normal(task.model.dim) * 0.1
    before = task.model.loss(theta, data.x, data.y)
    out = local_sgd(theta, data, SGDConfig(4, data.size, 0.05), np.random.default_rng(0), task.model)
    assert task.model.loss(out, data.x, data.y) < before


def test_local_sgd_errors(task):
    data = ClientDataset(task.x_train[:10], task.y_train[:10])
    with pytest.raises(ValueError):
        local_sgd(task.model.zeros(), data, SGDConfig(1, 32, 0.1), np.random.default_rng(0), task.model)
    bad = task.model.zeros()
    bad[0] = np.nan
    with pytest.raises(FloatingPointError):
        local_sgd(bad, data, SGDConfig(1, 5, 0.1), np.random.default_rng(0), task.model)


def test_aggregate_examples():
    assert aggregate([np.array([0.0, 2.0]), np.array([2.0, 0.0])]).tolist() == [1.0, 1.0]
    v = np.array([1.5, -2.0, 3.0])
    assert np.array_equal(aggregate([v, v, v]), v)
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([np.zeros(2), np.zeros(3)])


def test_aggregate_matches_independent_accumulation():
    rng = np.random.default_rng(4)
    models = [rng.standard_normal(50) for _ in range(20)]
    ref = [math.fsum(m[i] for m in reversed(models)) / len(models) for i in range(50)]
    assert np.allclose(aggregate(models), ref, atol=1e-12, rtol=0)


@given(st.permutations(range(6)))
def test_aggregate_permutation_invariant(perm):
    rng = np.random.default_rng(5)
    models = [rng.standard_normal(7) for _ in range(6)]
    assert np.allclose(aggregate([models[i] for i in perm]), aggregate(models), atol=1e-15)


def test_partition_noniid(task):
    parts = partition_noniid(task.x_train, task.y_train, 100, 4, 40, np.random.default_rng(0))
    assert len(parts) == 100
    assert all(p.size == 40 for p in parts)
    assert all(np.count_nonzero(p.class_histogram(10)) <= 4 for p in parts)
    # disjoint: identify rows by their feature vectors
    rows = np.concatenate([p.x for p in parts])
    assert len(np.unique(rows, axis=0)) == len(rows)


def test_partition_iid_like_when_constraint_vacuous(task):
    parts = partition_noniid(task.x_train, task.y_train, 40, 10, 50, np.random.default_rng(1))
    assert all(p.size == 50 for p in parts)
    assert np.mean([np.count_nonzero(p.class_histogram(10)) for p in parts]) > 5


@pytest.mark.parametrize("args", [(1000, 4, 40), (10, 3, 40), (10, 4, 0)])
def test_partition_infeasible(task, args):
    with pytest.raises(ValueError):
        partition_noniid(task.x_train, task.y_train, *args, np.random.default_rng(0))


def test_evaluate_majority_and_zero_model():
    model = SoftmaxModel(n_features=3, n_classes=10)
    y = np.repeat(np.arange(10), 30)
    x = np.random.default_rng(0).standard_normal((300, 3))
    theta = model.zeros()
    theta[-10 + 7] = 5.0  # bias toward class 7
    assert evaluate(theta, x, y, model) == pytest.approx(0.10)
    assert evaluate(model.zeros(), x, y, model) == pytest.approx(0.10)
    with pytest.raises(ValueError):
        evaluate(theta, x[:0], y[:0], model)


def test_training_loss_decreases_iid_full_participation(task):
    parts = partition_noniid(task.x_train, task.y_train, 20, 10, 100, np.random.default_rng(2))
    cfg = SGDConfig(4, 100, 0.05)
    rng = np.random.default_rng(3)
    theta = task.model.zeros()
    losses = []
    for _ in range(50):
        theta = aggregate([local_sgd(theta, p, cfg, rng, task.model) for p in parts])
        losses.append(task.model.loss(theta, task.x_train, task.y_train))
    assert np.all(np.diff(losses) < 0)
    assert evaluate(theta, task.x_test, task.y_test, task.model) > 0.5


def test_checkpoint_round_trip(tmp_path):
    theta = np.random.default_rng(6).standard_normal(13)
    save_model(tmp_path / "m.txt", theta)
    assert (tmp_path / "m.txt").read_text().startswith("dim 13\n")
    assert np.array_equal(load_model(tmp_path / "m.txt"), theta)
    (tmp_path / "bad.txt").write_text("dim 3\n1.0\n")
    with pytest.raises(ValueError):
        load_model(tmp_path / "bad.txt")
