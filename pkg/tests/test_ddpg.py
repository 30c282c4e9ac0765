from dataclasses import replace

import numpy as np
import pytest

from aerial_mec import ddpg
from aerial_mec.ddpg import (
    BufferNotReady,
    DDPGAgent,
    ReplayBuffer,
    TrainConfig,
    act_with_noise,
    actor_update,
    critic_update,
    noise_sigma,
    train,
)
from aerial_mec.env import EnvConfig, NetworkLayout, SecureOffloadEnv
from aerial_mec.nn import MLP, AdamState


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.episodes, cfg.capacity, cfg.batch) == (1000, 10000, 128)
    assert (cfg.lr_actor, cfg.lr_critic, cfg.tau, cfg.discount) == (1e-4, 6e-4, 1e-3, 0.99)


def test_network_shapes_for_k5():
    env = EnvConfig()
    agent = DDPGAgent(env.state_dim, env.action_dim, TrainConfig(), np.random.default_rng(0))
    assert agent.actor.sizes == [23, 64, 128, 256, 256, 128, 64, 13]
    assert agent.critic.sizes[0] == 4 * 5 + 16


def test_noise_schedule():
    cfg = TrainConfig(episodes=100)
    assert noise_sigma(0, cfg) == pytest.approx(0.2)
    assert noise_sigma(80, cfg) == pytest.approx(0.02)
    assert noise_sigma(99, cfg) == pytest.approx(0.02)
    sig = [noise_sigma(e, cfg) for e in range(100)]
    assert all(a >= b for a, b in zip(sig, sig[1:]))


def test_buffer_ring_semantics():
    buf = ReplayBuffer(3, 1, 1)
    for i in range(4):
        buf.push([i], [i], i, [i], False)
    assert len(buf) == 3
    assert 0.0 not in buf.rewards
    with pytest.raises(BufferNotReady):
        ReplayBuffer(5, 1, 1).sample(2, np.random.default_rng(0))


def test_buffer_sampling_uniform():
    n = 20
    buf = ReplayBuffer(n, 1, 1)
    for i in range(n):
        buf.push([i], [0], float(i), [0], False)
    rng = np.random.default_rng(0)
    draws = np.concatenate([buf.sample(20, rng)[2] for _ in range(5000)]).astype(int)
    counts = np.bincount(draws, minlength=n)
    chi2 = float(np.sum((counts - 1e5 / n) ** 2 / (1e5 / n)))
    # 1% critical value of chi-square with 19 degrees of freedom
    assert chi2 < 36.19


def test_act_with_noise_clipping_and_mean():
    actor = MLP([2, 1], "sigmoid", np.random.default_rng(0))
    s = np.array([0.3, 0.7])
    det = act_with_noise(actor, s, 0.0, None)
    np.testing.assert_array_equal(det, actor(s))
    actor.flat[:] = 0.0
    actor.biases[0][:] = np.log(0.99 / 0.01)  # output 0.99

    class Plus:
        def normal(self, loc, scale, size):
            return np.full(size, 0.5)

    assert act_with_noise(actor, s, 0.1, Plus())[0] == 1.0

    rng = np.random.default_rng(1)
    mu = float(actor(s)[0])
    sigma = 0.05
    draws = np.array([act_with_noise(actor, s, sigma, rng)[0] for _ in range(100_000)])
    # clipped-Gaussian mean, by numerical integration
    z = np.linspace(-8, 8, 200_001)
    pdf = np.exp(-z ** 2 / 2) / np.sqrt(2 * np.pi)
    expected = float(np.sum(np.clip(mu + sigma * z, 0, 1) * pdf) * (z[1] - z[0]))
    se = draws.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - expected) < 3 * se


def _const_net(sizes, act, value):
    net = MLP(sizes, act, np.random.default_rng(0))
    net.flat[:] = 0.0
    net.biases[-1][:] = value
    return net


def test_critic_target_terminal_and_bootstrap():
    critic = _const_net([3, 1], "identity", 0.0)
    t_actor = _const_net([2, 1], "sigmoid", 0.0)
    t_critic = _const_net([3, 1], "identity", 2.0)
    s = np.zeros((2, 2))
    a = np.zeros((2, 1))
    batch = (s, a, np.array([1.0, 1.0]), s, np.array([0.0, 1.0]))
    loss = critic_update(critic, t_actor, t_critic, batch, 0.99, 0.0, AdamState.for_params(critic.flat))
    # targets 2.98 (bootstrapped) and 1.0 (terminal); critic outputs 0
    assert loss == pytest.approx((2.98 ** 2 + 1.0) / 2)


def test_actor_update_flat_critic_is_noop():
    actor = MLP([2, 4, 1], "sigmoid", np.random.default_rng(0))
    critic = _const_net([3, 4, 1], "identity", 5.0)
    before = actor.flat.copy()
    actor_update(actor, critic, np.ones((4, 2)), 0.01, AdamState.for_params(actor.flat))
    np.testing.assert_array_equal(actor.flat, before)


def test_actor_chain_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    actor = MLP([1, 1], "sigmoid", rng)
    critic = MLP([2, 6, 1], "identity", rng)
    s = np.ones((1, 1))

    def mean_q():
        return float(critic(np.hstack([s, actor(s)])).mean())

    a, cache_a = actor.forward(s)
    _, cache_c = critic.forward(np.hstack([s, a]))
    _, g_in = critic.backward(cache_c, np.full((1, 1), 1.0), param_grads=False)
    g, _ = actor.backward(cache_a, g_in[:, 1:])
    num = np.zeros_like(actor.flat)
    for i in range(actor.flat.size):
        old = actor.flat[i]
        actor.flat[i] = old + 1e-6
        hi = mean_q()
        actor.flat[i] = old - 1e-6
        lo = mean_q()
        actor.flat[i] = old
        num[i] = (hi - lo) / 2e-6
    np.testing.assert_allclose(g, num, rtol=1e-4, atol=1e-10)


class QuadraticCritic:
    """Stand-in critic with Q(s, a) = -(a - 0.7)^2 and the MLP interface actor_update uses."""

    def forward(self, x):
        a = x[:, -1:]
        return -(a - 0.7) ** 2, a

    def backward(self, cache, grad_out, param_grads=True):
        a = cache
        g = np.zeros((a.shape[0], 2))
        g[:, -1:] = grad_out * (-2.0) * (a - 0.7)
        return None, g


def test_actor_update_converges_to_critic_optimum():
    actor = MLP([1, 1], "sigmoid", np.random.default_rng(0))
    s = np.ones((8, 1))
    adam = AdamState.for_params(actor.flat)
    for _ in range(3000):
        actor_update(actor, QuadraticCritic(), s, 0.01, adam)
    assert actor(s)[0, 0] == pytest.approx(0.7, abs=1e-3)


def small_env():
    return SecureOffloadEnv(EnvConfig(layout=NetworkLayout(users=((180.0, 230.0), (235.0, 125.0))),
                                      bits_per_user=2e6, max_slots=40))


def small_cfg(**kw):
    base = dict(episodes=4, batch=16, capacity=200, hidden=(16, 16), seed=5)
    base.update(kw)
    return TrainConfig(**base)


def test_training_is_deterministic():
    _, h1 = train(small_env(), small_cfg())
    _, h2 = train(small_env(), small_cfg())
    assert [m.as_row() for m in h1] == [m.as_row() for m in h2]
    _, h3 = train(small_env(), small_cfg(seed=6))
    assert [m.as_row() for m in h1] != [m.as_row() for m in h3]


def test_no_update_before_buffer_fills_and_actions_legal():
    env = small_env()
    calls = []
    real = DDPGAgent.update

    def spy(self, batch):
        calls.append(len(batch[0]))
        return real(self, batch)

    DDPGAgent.update = spy
    try:
        _, hist = train(env, small_cfg(batch=30, episodes=2))
    finally:
        DDPGAgent.update = real
    steps = sum(m.episode_length for m in hist)
    assert len(calls) == max(steps - 29, 0)
    assert hist[0].updates == max(hist[0].episode_length - 29, 0)


def test_metrics_rows_consistent():
    _, hist = train(small_env(), small_cfg())
    for m in hist:
        row = m.as_row()
        assert "wall_time_s" not in row
        assert m.energy_cost + m.delay_cost == pytest.approx(m.average_cost)
        parts = sum(row[f"reward_{t}"] for t in ("offload", "collision", "capacity", "leftover", "cost"))
        assert parts == pytest.approx(m.accumulated_reward, rel=1e-9, abs=1e-9)


def test_evaluate_trajectory_length():
    env = small_env()
    agent, _ = train(env, small_cfg(episodes=1))
    metrics, traj = ddpg.evaluate(env, agent.actor)
    assert len(traj) == metrics.episode_length
    assert {"x", "y", "z", "power_w_0", "freq_hz_1", "secrecy_bps_0", "remaining_bits_1"} <= set(traj[0])


def test_config_validation():
    with pytest.raises(ValueError):
        replace(TrainConfig(), batch=20000).validate()
    with pytest.raises(ValueError):
        replace(TrainConfig(), tau=0.0).validate()
