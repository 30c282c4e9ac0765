import numpy as np
import pytest

from aerial_mec.nn import (
    MLP,
    AdamState,
    StaleCacheError,
    adam_step,
    load_checkpoint,
    save_checkpoint,
    soft_update,
)


def numeric_grad(f, arr, eps=1e-5):
    flat = arr.reshape(-1)  # view, so perturbations reach the caller's array
    g = np.zeros_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f()
        flat[i] = old - eps
        lo = f()
        flat[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g.reshape(arr.shape)


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-7)))


@pytest.mark.parametrize("out_act", ["sigmoid", "identity"])
def test_backward_matches_finite_differences(out_act):
    rng = np.random.default_rng(0)
    net = MLP([4, 8, 3], out_act, rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 3))
    out, cache = net.forward(x)
    grads, grad_in = net.backward(cache, w)
    num = numeric_grad(lambda: float(np.sum(net(x) * w)), net.flat)
    assert rel_err(grads, num) < 1e-4
    num_in = numeric_grad(lambda: float(np.sum(net(x) * w)), x)
    assert rel_err(grad_in, num_in) < 1e-4


def test_zero_weights_outputs():
    actor = MLP([3, 4, 2], "sigmoid", np.random.default_rng(0))
    actor.flat[:] = 0
    np.testing.assert_array_equal(actor(np.ones(3)), 0.5)
    critic = MLP([3, 4, 1], "identity", np.random.default_rng(0))
    critic.flat[:] = 0
    assert critic(np.ones(3))[0] == 0.0


def test_affine_layer_matches_matmul():
    rng = np.random.default_rng(1)
    net = MLP([3, 2], "identity", rng)
    x = rng.normal(size=(4, 3))
    w, b = net.weights[0], net.biases[0]
    expected = np.array([[sum(x[i, k] * w[k, j] for k in range(3)) + b[j] for j in range(2)] for i in range(4)])
    np.testing.assert_allclose(net(x), expected, rtol=1e-12)


def test_linear_net_gradient_is_outer_product():
    net = MLP([3, 2], "identity", np.random.default_rng(2))
    x = np.array([1.0, -2.0, 0.5])
    g = np.array([0.3, -1.0])
    _, cache = net.forward(x)
    grads, _ = net.backward(cache, g)
    dw, db = net.split(grads)
    np.testing.assert_allclose(dw, np.outer(x, g))
    np.testing.assert_allclose(db, g)


def test_zero_output_grad_gives_zero_grads():
    net = MLP([4, 6, 2], "sigmoid", np.random.default_rng(3))
    _, cache = net.forward(np.ones((2, 4)))
    grads, _ = net.backward(cache, np.zeros((2, 2)))
    assert not grads.any()


def test_stale_cache_and_shape_errors():
    net = MLP([2, 3, 1], "identity", np.random.default_rng(0))
    _, cache = net.forward(np.ones(2))
    net.touch()
    with pytest.raises(StaleCacheError):
        net.backward(cache, np.ones(1))
    _, cache = net.forward(np.ones(2))
    with pytest.raises(ValueError):
        net.backward(cache, np.ones(2))
    with pytest.raises(ValueError):
        net.forward(np.ones(3))


def test_adam_first_step():
    p = np.array([0.0])
    state = AdamState.for_params(p)
    adam_step(p, np.array([1.0]), state, 0.001)
    assert p[0] == pytest.approx(-0.001, rel=1e-6)


def test_adam_zero_gradient_no_change():
    p = np.array([1.0, 2.0])
    state = AdamState.for_params(p)
    adam_step(p, np.zeros(2), state, 0.1)
    np.testing.assert_array_equal(p, [1.0, 2.0])
    with pytest.raises(ValueError):
        adam_step(p, np.zeros(3), state, 0.1)


def test_soft_update():
    rng = np.random.default_rng(0)
    online = MLP([2, 3, 1], "identity", rng)
    target = online.copy()
    target.flat[:] = 0.0
    online.flat[:] = 1.0
    soft_update(target, online, 0.001)
    np.testing.assert_allclose(target.flat, 0.001)
    soft_update(target, online, 1.0)
    np.testing.assert_array_equal(target.flat, online.flat)
    with pytest.raises(ValueError):
        soft_update(MLP([2, 4, 1], "identity", rng), online, 0.5)


def test_soft_update_contracts_geometrically():
    rng = np.random.default_rng(5)
    online = MLP([3, 5, 2], "identity", rng)
    target = MLP([3, 5, 2], "identity", rng)
    gap0 = np.linalg.norm(target.flat - online.flat)
    tau, n = 0.01, 50
    for _ in range(n):
        target.soft_update_from(online, tau)
    gap = np.linalg.norm(target.flat - online.flat)
    assert gap == pytest.approx(gap0 * (1 - tau) ** n, rel=1e-10)


@pytest.mark.parametrize("dtype", ["float32", "float64"])
def test_checkpoint_round_trip(tmp_path, dtype):
    rng = np.random.default_rng(9)
    a = MLP([4, 8, 2], "sigmoid", rng, dtype=dtype)
    c = MLP([6, 8, 1], "identity", rng, dtype=dtype)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, {"actor": a, "critic": c}, extra={"seed": 3})
    nets, extra = load_checkpoint(path)
    assert extra == {"seed": 3}
    for name, net in (("actor", a), ("critic", c)):
        loaded = nets[name]
        assert loaded.sizes == net.sizes and loaded.activations == net.activations
        assert loaded.dtype == net.dtype
        np.testing.assert_array_equal(loaded.flat, net.flat)
        np.testing.assert_array_equal(loaded(np.ones(net.sizes[0])), net(np.ones(net.sizes[0])))


def test_checkpoint_rejects_unknown_version(tmp_path):
    import json
    path = tmp_path / "bad.npz"
    meta = np.frombuffer(json.dumps({"format_version": 99, "networks": {}, "extra": {}}).encode(), np.uint8)
    np.savez(path, __meta__=meta)
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_init_bounds():
    net = MLP([100, 50, 1], "identity", np.random.default_rng(0))
    assert np.abs(net.weights[0]).max() <= 0.1
    assert np.abs(net.weights[1]).max() <= 1 / np.sqrt(50)
