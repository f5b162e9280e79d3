from collections import OrderedDict

import numpy as np
import pytest

from berngraph.optim import adam_init, adam_step


def arrays():
    return OrderedDict(w=np.array([[0.5, -1.0], [2.0, 0.0]]), b=np.array([0.1, -0.2]))


class TestAdam:
    def test_zero_gradient(self):
        a = arrays()
        state = adam_init(a)
        new, state2 = adam_step(a, OrderedDict((k, np.zeros_like(v)) for k, v in a.items()), state, 1e-3)
        for k in a:
            assert np.array_equal(new[k], a[k])
        assert state2.step == 1 and state.step == 0

    def test_first_step_is_signed_lr(self):
        a = arrays()
        g = OrderedDict(w=np.array([[3.0, -0.01], [1e-3, -7.0]]), b=np.array([0.2, -0.4]))
        new, _ = adam_step(a, g, adam_init(a), 1e-4)
        for k in a:
            # bias-corrected m/sqrt(v) = g/|g| at t = 1, up to eps
            np.testing.assert_allclose(new[k] - a[k], -1e-4 * np.sign(g[k]), rtol=1e-4)

    def test_deterministic(self):
        a = arrays()
        rng = np.random.default_rng(0)
        g = OrderedDict((k, rng.normal(size=v.shape)) for k, v in a.items())
        state = adam_init(a)
        _, state = adam_step(a, g, state, 1e-2)
        one = adam_step(a, g, state.copy(), 1e-2)
        two = adam_step(a, g, state.copy(), 1e-2)
        for k in a:
            assert np.array_equal(one[0][k], two[0][k])
            assert np.array_equal(one[1].m[k], two[1].m[k])

    def test_recurrence(self):
        a = OrderedDict(x=np.array([1.0]))
        state = adam_init(a)
        m = v = 0.0
        x = 1.0
        for t, g in enumerate([0.5, -0.25, 1.0], start=1):
            a, state = adam_step(a, OrderedDict(x=np.array([g])), state, 0.1)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            x -= 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            assert a["x"][0] == pytest.approx(x, rel=1e-14)
        assert state.step == 3

    def test_non_finite_gradient(self):
        a = arrays()
        g = OrderedDict((k, np.zeros_like(v)) for k, v in a.items())
        g["b"][0] = np.nan
        with pytest.raises(FloatingPointError, match="b"):
            adam_step(a, g, adam_init(a), 1e-3)

    def test_shape_mismatch(self):
        a = arrays()
        g = OrderedDict(w=np.zeros(3), b=np.zeros(2))
        with pytest.raises(ValueError):
            adam_step(a, g, adam_init(a), 1e-3)

    def test_dtype_preserved(self):
        a = OrderedDict(x=np.ones(3, dtype=np.float32))
        new, _ = adam_step(a, OrderedDict(x=np.ones(3, dtype=np.float32)), adam_init(a), 1e-3)
        assert new["x"].dtype == np.float32
