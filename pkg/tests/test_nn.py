import numpy as np
import pytest

from filteraware import nn


def flatten_params(net):
    return np.concatenate([a.ravel() for a in net.weights + net.biases])


def finite_difference_grad(net, x, y, h=1e-5):
    """Central differences of the mean squared loss, parameter by parameter."""
    def loss_at(vec):
        probe = nn.copy_mlp(net)
        offset = 0
        for arr in probe.weights + probe.biases:
            arr.flat[:] = vec[offset:offset + arr.size]
            offset += arr.size
        out = nn.forward(probe, x)
        return float(np.mean((out - y) ** 2))

    theta = flatten_params(net)
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        g[i] = (loss_at(up) - loss_at(down)) / (2 * h)
    return g


def random_small_net(rng, input_dim=3):
    return nn.init_mlp(input_dim, rng, hidden=(5, 4))


def test_forward_zero_weights_returns_bias():
    rng = np.random.default_rng(0)
    net = nn.init_mlp(2, rng, hidden=(4,))
    for w in net.weights:
        w[:] = 0.0
    net.biases[-1][:] = 3.25
    assert nn.forward(net, np.array([1.0, -2.0])) == 3.25
    assert nn.forward(net, np.array([100.0, 7.0])) == 3.25


def test_forward_hand_built_single_unit():
    # relu(w*x + c) * v + b for x = 2
    w, c, v, b = 1.5, -1.0, 2.0, 0.25
    net = nn.Mlp(weights=[np.array([[w]]), np.array([[v]])],
                 biases=[np.array([c]), np.array([b])])
    x = np.array([2.0])
    assert nn.forward(net, x) == pytest.approx(max(0.0, w * 2.0 + c) * v + b)


def test_forward_piecewise_linear_within_region():
    rng = np.random.default_rng(1)
    net = random_small_net(rng)
    x1 = np.full(3, 0.5)
    x2 = np.full(3, 0.55)  # close enough to share the activation pattern
    for alpha in (0.0, 0.3, 0.7, 1.0):
        mix = alpha * x1 + (1 - alpha) * x2
        expected = alpha * nn.forward(net, x1) + (1 - alpha) * nn.forward(net, x2)
        assert nn.forward(net, mix) == pytest.approx(expected, rel=1e-9)


def test_forward_batch_matches_single():
    rng = np.random.default_rng(2)
    net = random_small_net(rng)
    xs = rng.normal(size=(6, 3))
    batch = nn.forward(net, xs)
    for i, x in enumerate(xs):
        assert batch[i] == pytest.approx(nn.forward(net, x), rel=1e-12)


def test_forward_rejects_dim_mismatch():
    rng = np.random.default_rng(3)
    net = random_small_net(rng)
    with pytest.raises(ValueError):
        nn.forward(net, np.zeros(5))


def test_grad_zero_at_optimum():
    rng = np.random.default_rng(4)
    net = random_small_net(rng)
    x = rng.normal(size=(8, 3))
    y = nn.forward(net, x)
    grads, loss = nn.grad_mse(net, x, y)
    assert loss == 0.0
    for g in grads.weights + grads.biases:
        np.testing.assert_array_equal(g, 0.0)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(3):
        net = random_small_net(rng)
        x = rng.normal(size=(6, 3))
        y = rng.normal(size=6)
        grads, _ = nn.grad_mse(net, x, y)
        g_bp = flatten_params(grads)
        g_fd = finite_difference_grad(net, x, y)
        rel = np.linalg.norm(g_bp - g_fd) / max(np.linalg.norm(g_fd), 1e-12)
        assert rel < 1e-4


def test_grad_linear_in_residual_scaling():
    rng = np.random.default_rng(6)
    net = random_small_net(rng)
    x = rng.normal(size=(5, 3))
    out = nn.forward(net, x)
    resid = rng.normal(size=5)
    g1, _ = nn.grad_mse(net, x, out - resid)
    g2, _ = nn.grad_mse(net, x, out - 2 * resid)
    for a, b in zip(g1.weights + g1.biases, g2.weights + g2.biases):
        np.testing.assert_allclose(2 * a, b, rtol=1e-12, atol=1e-14)


def test_adam_first_step_delta():
    rng = np.random.default_rng(7)
    net = random_small_net(rng)
    before = flatten_params(net)
    ones = nn.Mlp([np.ones_like(w) for w in net.weights],
                  [np.ones_like(b) for b in net.biases])
    after, state = nn.adam_step(net, ones, nn.init_adam(net), lr=0.001)
    delta = flatten_params(after) - before
    np.testing.assert_allclose(delta, -0.001 / (1 + 1e-8), rtol=1e-12)
    assert state.step == 1


def test_adam_zero_gradient_keeps_params():
    rng = np.random.default_rng(8)
    net = random_small_net(rng)
    zeros = nn.Mlp([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])
    after, state = nn.adam_step(net, zeros, nn.init_adam(net), lr=0.01)
    np.testing.assert_array_equal(flatten_params(after), flatten_params(net))
    assert state.step == 1


def test_adam_deterministic():
    rng = np.random.default_rng(9)
    net = random_small_net(rng)
    grads = nn.Mlp([np.full_like(w, 0.3) for w in net.weights],
                   [np.full_like(b, -0.2) for b in net.biases])
    a1, _ = nn.adam_step(net, grads, nn.init_adam(net), lr=0.01)
    a2, _ = nn.adam_step(net, grads, nn.init_adam(net), lr=0.01)
    np.testing.assert_array_equal(flatten_params(a1), flatten_params(a2))


def test_polyak_hand_value():
    t = nn.Mlp([np.zeros((2, 2))], [np.zeros(2)])
    o = nn.Mlp([np.ones((2, 2))], [np.ones(2)])
    out = nn.polyak_update(t, o, 0.995)
    np.testing.assert_allclose(out.weights[0], 0.005)
    np.testing.assert_allclose(out.biases[0], 0.005)


def test_polyak_fixed_point():
    rng = np.random.default_rng(10)
    net = random_small_net(rng)
    out = nn.polyak_update(net, net, 0.9)
    np.testing.assert_allclose(flatten_params(out), flatten_params(net), rtol=1e-15)


def test_polyak_geometric_decay():
    rng = np.random.default_rng(11)
    online = random_small_net(rng)
    target = random_small_net(rng)
    eta = 0.95
    gap = np.linalg.norm(flatten_params(target) - flatten_params(online))
    for _ in range(5):
        target = nn.polyak_update(target, online, eta)
        new_gap = np.linalg.norm(flatten_params(target) - flatten_params(online))
        assert new_gap == pytest.approx(eta * gap, rel=1e-9)
        gap = new_gap


def test_save_load_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(12)
    net = nn.init_mlp(2, rng)
    path = tmp_path / "weights.json"
    nn.save_mlp(path, net, metadata={"env": "darkzone"})
    loaded, meta = nn.load_mlp(path)
    assert meta["env"] == "darkzone"
    for a, b in zip(net.weights + net.biases, loaded.weights + loaded.biases):
        np.testing.assert_array_equal(a, b)
    x = rng.normal(size=(10, 2))
    np.testing.assert_array_equal(nn.forward(net, x), nn.forward(loaded, x))


def test_training_fits_sine():
    rng = np.random.default_rng(13)
    x = np.linspace(-1.0, 1.0, 256)[:, None]
    y = np.sin(x)[:, 0]
    net = nn.init_mlp(1, rng)
    state = nn.init_adam(net)
    mse = np.inf
    for step in range(5000):
        grads, mse = nn.grad_mse(net, x, y)
        if mse < 1e-3:
            break
        net, state = nn.adam_step(net, grads, state, lr=1e-3)
    assert mse < 1e-3
