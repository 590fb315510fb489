import math

import numpy as np
import pytest

from pideeponet.errors import NonFiniteError, ShapeError
from pideeponet.nn import (
    AdamState, MlpParams, adam_step, gelu, gelu_grad, init_mlp, mlp_backward, mlp_dims,
    mlp_forward, mse,
)
from pideeponet.rng import substream

# Reference values evaluated with mpmath at 40 digits before the build.
GELU_AT_ONE = 0.8413447460685429485852325
NET_121 = 0.4864517868075426538187202
ADAM_FIRST_STEP = -0.000999999990000000099999999


def test_gelu_fixed_points():
    assert gelu(0.0) == 0.0
    assert gelu(10.0) == pytest.approx(10.0, abs=1e-6)
    assert gelu(1.0) == pytest.approx(GELU_AT_ONE, rel=1e-15)


def test_gelu_derivative_matches_fd():
    x = np.linspace(-5, 5, 201)
    h = 1e-5
    fd = (gelu(x + h) - gelu(x - h)) / (2 * h)
    assert np.max(np.abs(gelu_grad(x) - fd)) < 1e-7


def test_gelu_matches_math_erf(rng):
    x = rng.normal(0, 3, 50)
    ref = np.array([v * 0.5 * math.erfc(-v / math.sqrt(2)) for v in x])
    np.testing.assert_allclose(gelu(x), ref, rtol=1e-13, atol=1e-300)


def test_zero_network_outputs_zero(rng):
    p = MlpParams([np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(2)])
    np.testing.assert_array_equal(mlp_forward(p, rng.normal(size=3)), np.zeros(2))


def test_identity_single_layer():
    p = MlpParams([np.eye(3)], [np.zeros(3)], hidden_activation="identity")
    x = np.array([1.5, -2.0, 0.25])
    np.testing.assert_array_equal(mlp_forward(p, x), x)


def test_hand_built_121_net():
    p = MlpParams([np.array([[0.5, -1.0]]), np.array([[2.0], [3.0]])],
                  [np.array([0.1, 0.2]), np.array([-0.5])])
    assert mlp_forward(p, np.array([1.5]))[0] == pytest.approx(NET_121, rel=1e-14)


def test_dimension_mismatch_names_layer():
    with pytest.raises(ShapeError, match="layer 1"):
        MlpParams([np.zeros((2, 3)), np.zeros((4, 1))], [np.zeros(3), np.zeros(1)])
    p = init_mlp([2, 3, 1], substream(0, "x"))
    with pytest.raises(ShapeError, match="layer 0"):
        mlp_forward(p, np.zeros(5))


def test_zero_cotangent_gives_zero_gradients(rng):
    p = init_mlp([3, 4, 2], substream(1, "x"))
    grads, dx = mlp_backward(p, rng.normal(size=3), np.zeros(2))
    assert all(not g.any() for g in grads) and not dx.any()


def test_linear_layer_gradient_is_outer_product(rng):
    W = rng.normal(size=(3, 2))
    p = MlpParams([W], [np.zeros(2)])
    x, c = rng.normal(size=3), rng.normal(size=2)
    grads, dx = mlp_backward(p, x, c)
    np.testing.assert_allclose(grads[0], np.outer(x, c))
    np.testing.assert_allclose(grads[1], c)
    np.testing.assert_allclose(dx, W @ c)


def _fd_check(p, x, c, h=1e-6):
    grads, dx = mlp_backward(p, x, c)
    flat = p.flat()
    analytic = np.concatenate([g.ravel() for g in grads])
    for k in range(flat.size):
        q = p.copy()
        up, dn = flat.copy(), flat.copy()
        up[k] += h
        dn[k] -= h
        q.set_flat(up)
        fu = mlp_forward(q, x) @ c
        q.set_flat(dn)
        fd = (fu - mlp_forward(q, x) @ c) / (2 * h)
        assert abs(analytic[k] - fd) <= 1e-5 * max(1.0, abs(fd)), k
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fd = (mlp_forward(p, x + e) @ c - mlp_forward(p, x - e) @ c) / (2 * h)
        assert abs(dx[k] - fd) <= 1e-5 * max(1.0, abs(fd))


def test_random_231_net_matches_fd(rng):
    p = init_mlp([2, 3, 1], substream(7, "fd"), "fan-in")
    _fd_check(p, rng.normal(size=2), np.array([1.0]))


def test_adam_first_step_value():
    st = AdamState.zeros(1, lr=1e-3)
    new, st = adam_step(st, np.array([0.0]), np.array([1.0]))
    assert new[0] == pytest.approx(ADAM_FIRST_STEP, rel=1e-13)
    assert st.step == 1


def test_adam_zero_gradient_keeps_params():
    st = AdamState.zeros(3)
    x = np.array([1.0, -2.0, 3.0])
    new, st = adam_step(st, x, np.zeros(3))
    np.testing.assert_array_equal(new, x)
    assert st.step == 1


def test_adam_moves_against_constant_gradient():
    st = AdamState.zeros(2)
    x = np.zeros(2)
    for _ in range(50):
        x, st = adam_step(st, x, np.array([0.3, -2.0]))
    assert x[0] < 0 < x[1]
    assert st.step == 50


def test_adam_reports_bad_index():
    with pytest.raises(NonFiniteError, match="index 2"):
        adam_step(AdamState.zeros(3), np.zeros(3), np.array([0.0, 1.0, np.nan]))


def test_mse_examples(rng):
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    with pytest.raises(ShapeError):
        mse([], [])
    a, b = rng.normal(size=1001), rng.normal(size=1001)
    # independent summation order: math.fsum over reversed squares
    ref = math.fsum(((a - b) ** 2)[::-1]) / a.size
    assert mse(a, b) == pytest.approx(ref, rel=1e-13)


def test_default_dims_and_init():
    dims = mlp_dims(100, 128)
    assert dims == [100, 128, 128, 128, 128]
    p = init_mlp(dims, substream(0, "g"))
    for w, b in zip(p.weights, p.biases):
        lim = math.sqrt(6.0 / sum(w.shape))
        assert np.all(np.abs(w) <= lim) and not b.any()
    q = init_mlp(dims, substream(0, "g"), "fan-in")
    for w, b in zip(q.weights, q.biases):
        lim = 1 / math.sqrt(w.shape[0])
        assert np.all(np.abs(w) <= lim) and np.all(np.abs(b) <= lim) and b.any()
    with pytest.raises(ValueError):
        init_mlp(dims, substream(0, "g"), "he")


def test_init_is_deterministic():
    a = init_mlp([3, 5, 2], substream(4, "d")).flat()
    b = init_mlp([3, 5, 2], substream(4, "d")).flat()
    np.testing.assert_array_equal(a, b)
