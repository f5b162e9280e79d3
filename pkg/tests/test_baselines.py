import numpy as np
import pytest

from berngraph.baselines import (MLP_HIDDEN, init_linear, init_mlp, predict_baseline, train_lr,
                                 train_mlp)
from berngraph.gnn import bce_loss


def xor_data(repeat=25):
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * repeat, dtype=float)
    y = (x[:, :1] != x[:, 1:]).astype(float)
    return x, y


def accuracy(model, x, y):
    return float(((model.predict_proba(x) > 0.5) == (y > 0.5)).mean())


def fd_check(model, x, y, step=1e-6):
    _, grads = model.loss_and_grad(x, y)
    worst = 0.0
    for name, arr in model.arrays.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            up = model.loss_and_grad(x, y)[0]
            arr[idx] = old - step
            down = model.loss_and_grad(x, y)[0]
            arr[idx] = old
            num = (up - down) / (2 * step)
            worst = max(worst, abs(num - grads[name][idx]) / max(abs(num), abs(grads[name][idx]), 1e-6))
    return worst


class TestLinear:
    def test_zero_init(self):
        model = init_linear(4, 2)
        assert (model.predict_proba(np.ones((3, 4))) == 0.5).all()

    def test_separable(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(200, 3))
        y = (x[:, :1] + 0.5 * x[:, 1:2] > 0).astype(float)
        model, history = train_lr(x, y, lr=0.05, epochs=60, batch_size=20)
        assert accuracy(model, x, y) >= 0.97
        assert history[-1]["train_loss"] < history[0]["train_loss"]

    def test_cannot_learn_xor(self):
        x, y = xor_data()
        model, _ = train_lr(x, y, lr=0.05, epochs=200, batch_size=100)
        assert accuracy(model, x, y) <= 0.75

    def test_gradient(self):
        rng = np.random.default_rng(1)
        model = init_linear(5, 3, l2=0.1)
        model.arrays["W"][:] = rng.normal(size=(3, 5))
        x, y = rng.random((6, 5)), (rng.random((6, 3)) < 0.5).astype(float)
        assert fd_check(model, x, y) < 1e-5

    def test_duplicate_rows_full_batch(self):
        rng = np.random.default_rng(2)
        x, y = rng.random((10, 4)), (rng.random((10, 2)) < 0.5).astype(float)
        a, _ = train_lr(x, y, lr=0.01, epochs=30, batch_size=10)
        b, _ = train_lr(np.vstack([x, x]), np.vstack([y, y]), lr=0.01, epochs=30, batch_size=20)
        for k in a.arrays:
            np.testing.assert_allclose(a.arrays[k], b.arrays[k], rtol=1e-9, atol=1e-12)

    def test_input_width_checked(self):
        with pytest.raises(ValueError):
            init_linear(4, 2).predict_proba(np.ones((1, 3)))


class TestMlp:
    def test_learns_xor(self):
        x, y = xor_data()
        model, _ = train_mlp(x, y, lr=0.02, epochs=300, batch_size=20, seed=1)
        assert accuracy(model, x, y) == 1.0

    def test_hidden_width(self):
        model = init_mlp(7, 2)
        assert model.arrays["W1"].shape == (MLP_HIDDEN, 7)
        assert MLP_HIDDEN == 64

    def test_gradient(self):
        rng = np.random.default_rng(3)
        model = init_mlp(5, 3, hidden=6, seed=2)
        for k in model.arrays:
            model.arrays[k] = model.arrays[k] + rng.normal(0, 0.2, model.arrays[k].shape)
        x, y = rng.random((6, 5)), (rng.random((6, 3)) < 0.5).astype(float)
        assert fd_check(model, x, y) < 1e-5

    def test_deterministic(self):
        x, y = xor_data(5)
        a, ha = train_mlp(x, y, lr=0.01, epochs=5, batch_size=4, seed=3)
        b, hb = train_mlp(x, y, lr=0.01, epochs=5, batch_size=4, seed=3)
        assert ha == hb
        for k in a.arrays:
            assert np.array_equal(a.arrays[k], b.arrays[k])


def test_predict_baseline_threshold():
    model = init_linear(2, 3)
    model.arrays["b"][:] = [0.1, 0.0, -0.1]
    preds = predict_baseline(model, np.zeros((2, 2)))
    assert [p.decisions.tolist() for p in preds] == [[1, 0, 0]] * 2


def test_shared_loss():
    model = init_linear(3, 2)
    x = np.ones((4, 3))
    y = np.array([[1, 0]] * 4, dtype=float)
    loss, _ = model.loss_and_grad(x, y)
    assert loss == pytest.approx(bce_loss(np.full((4, 2), 0.5), y))
