import math

import numpy as np
import pytest

from archer.agent import (OuNoise, actor_update, critic_gradient, critic_targets,
                          load_checkpoint, make_agent, ou_step, save_checkpoint, select_action,
                          soft_update, train_step)
from archer.errors import ShapeError
from archer.numcore import Layer, MlpParams, finite_diff_grad
from archer.replay import Transitions


def zero_out(net: MlpParams):
    for a in net.arrays():
        a[...] = 0.0


def random_batch(rng, n=32, sd=4, gd=2, ad=2):
    return Transitions(rng.normal(size=(n, sd)), rng.normal(size=(n, gd)),
                       rng.uniform(-1, 1, size=(n, ad)), -rng.integers(0, 2, size=n) * 1.0,
                       rng.normal(size=(n, sd)), np.zeros(n, bool), np.zeros(n, bool))


@pytest.fixture
def agent():
    return make_agent(4, 2, 2, np.random.default_rng(0), hidden=(16, 16))


# --- action selection ------------------------------------------------------

def test_zero_actor_gives_zero_action(agent):
    zero_out(agent.actor)
    a = select_action(agent, np.ones(4), np.ones(2))
    assert np.array_equal(a, np.zeros(2))


def test_zero_epsilon_noise_is_noise_free(agent):
    rng = np.random.default_rng(1)
    s, g = rng.normal(size=4), rng.normal(size=2)
    clean = select_action(agent, s, g)
    noisy = select_action(agent, s, g, OuNoise.zeros(2, epsilon=0.0), rng)
    assert np.array_equal(clean, noisy)


def test_actions_bounded(agent):
    rng = np.random.default_rng(2)
    noise = OuNoise.zeros((64, 2), epsilon=50.0)
    for _ in range(10):
        a = select_action(agent, rng.normal(size=(64, 4)), rng.normal(size=(64, 2)), noise, rng)
        assert np.all(np.abs(a) <= 1.0)
        assert np.abs(a).max() == 1.0  # huge noise must hit the clamp


def test_select_action_shape_error(agent):
    with pytest.raises(ShapeError):
        select_action(agent, np.ones(4), np.ones(3))


# --- OU noise --------------------------------------------------------------

def test_ou_deterministic_decay():
    noise = OuNoise(np.array([1.0]), theta=0.15, sigma=0.0)
    rng = np.random.default_rng(0)
    assert ou_step(noise, rng)[0] == pytest.approx(0.85, abs=1e-15)
    for n in range(2, 30):
        assert ou_step(noise, rng)[0] == pytest.approx(0.85 ** n, rel=1e-12)


def test_ou_random_walk_variance():
    # theta = 0, sigma = 1: x_n is a sum of n iid normals, variance n
    noise = OuNoise(np.zeros(40_000), theta=0.0, sigma=1.0)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = ou_step(noise, rng)
    # sd of the sample variance is about 10 * sqrt(2 / 40000) = 0.07
    assert np.var(x) == pytest.approx(10.0, abs=0.35)


def test_ou_reset():
    noise = OuNoise(np.ones(3))
    noise.reset()
    assert not noise.state.any()
    noise.decay()
    assert noise.epsilon == pytest.approx(0.099)


# --- targets and soft updates ----------------------------------------------

def constant_critic(agent, value):
    for layer in agent.target_critic.layers:
        layer.weight[...] = 0.0
        layer.bias[...] = 0.0
    agent.target_critic.layers[-1].bias[0] = value


def one_transition(reward):
    return Transitions(np.zeros((1, 4)), np.zeros((1, 2)), np.zeros((1, 2)),
                       np.array([reward]), np.zeros((1, 4)), np.zeros(1, bool),
                       np.zeros(1, bool))


def test_targets_zero_bootstrap(agent):
    constant_critic(agent, 0.0)
    assert critic_targets(agent, one_transition(-1.0)).tolist() == [-1.0]


def test_targets_discounted(agent):
    constant_critic(agent, -5.0)
    assert critic_targets(agent, one_transition(0.0)).tolist() == [-4.9]


def test_targets_with_zero_networks(agent):
    zero_out(agent.target_critic)
    zero_out(agent.target_actor)
    batch = random_batch(np.random.default_rng(0))
    batch.reward[:] = -1.0
    assert np.all(critic_targets(agent, batch) == -1.0)


def test_soft_update_arithmetic(agent):
    agent.tau = 0.001
    for a in agent.critic.arrays() + agent.actor.arrays():
        a[...] = 1.0
    zero_out(agent.target_critic)
    zero_out(agent.target_actor)
    soft_update(agent)
    assert all(np.all(a == 0.001) for a in agent.target_critic.arrays())
    assert all(np.all(a == 0.001) for a in agent.target_actor.arrays())


def test_soft_update_fixed_point(agent):
    before = agent.target_actor.flat().copy()
    soft_update(agent)
    assert np.array_equal(agent.target_actor.flat(), before)


def test_soft_update_geometric_convergence(agent):
    agent.tau = 0.05
    rng = np.random.default_rng(4)
    agent.target_critic.set_flat(rng.normal(size=agent.critic.flat().size))
    gap0 = agent.target_critic.flat() - agent.critic.flat()
    prev = np.abs(gap0).max()
    for n in range(1, 40):
        soft_update(agent)
        gap = agent.target_critic.flat() - agent.critic.flat()
        np.testing.assert_allclose(gap, gap0 * 0.95 ** n, rtol=1e-9, atol=1e-15)
        assert np.abs(gap).max() < prev
        prev = np.abs(gap).max()


# --- training --------------------------------------------------------------

def test_perfect_fit_gives_zero_loss_and_no_change(agent):
    batch = random_batch(np.random.default_rng(5))
    # zero critic, zero target critic and zero rewards: y == Q == 0
    zero_out(agent.critic)
    zero_out(agent.target_critic)
    batch.reward[:] = 0.0
    before = agent.critic.flat().copy()
    c_loss, _ = train_step(agent, batch)
    assert c_loss == 0.0
    assert np.array_equal(agent.critic.flat(), before)


def test_critic_gradient_treats_targets_as_constant(agent):
    rng = np.random.default_rng(6)
    batch = random_batch(rng, n=8)
    agent.target_critic.set_flat(rng.normal(scale=0.3, size=agent.critic.flat().size))
    y = critic_targets(agent, batch)
    loss, grads = critic_gradient(agent, batch)
    probe = agent.critic.copy()
    theta = agent.critic.flat()
    obs = np.concatenate([batch.state, batch.goal, batch.action], 1)

    def mse(flat):
        probe.set_flat(flat)
        q = np.maximum(obs @ probe.layers[0].weight + probe.layers[0].bias, 0)
        q = np.maximum(q @ probe.layers[1].weight + probe.layers[1].bias, 0)
        q = q @ probe.layers[2].weight + probe.layers[2].bias
        return float(np.mean((q[:, 0] - y) ** 2))

    assert loss == pytest.approx(mse(theta), rel=1e-12)
    numeric = finite_diff_grad(mse, theta, 1e-6)
    np.testing.assert_allclose(grads.flat(), numeric, rtol=1e-4, atol=1e-8)
    # moving the target networks moves y but not the formula
    agent.target_critic.set_flat(agent.target_critic.flat() + 0.1)
    assert not np.allclose(critic_targets(agent, batch), y)


def test_hand_stepped_one_dimensional_update():
    rng = np.random.default_rng(7)
    agent = make_agent(1, 1, 1, rng, hidden=(), gamma=0.9, actor_lr=0.01, critic_lr=0.05)
    wa, ba = np.array([0.3, -0.2]), 0.1
    wc, bc = np.array([0.5, 0.4, -0.7]), 0.2
    wat, bat = np.array([0.1, 0.2]), -0.05
    wct, bct = np.array([-0.3, 0.6, 0.8]), 0.1
    agent.actor.layers[0] = Layer(wa[:, None], [ba], "tanh")
    agent.target_actor.layers[0] = Layer(wat[:, None], [bat], "tanh")
    agent.critic.layers[0] = Layer(wc[:, None], [bc], "linear")
    agent.target_critic.layers[0] = Layer(wct[:, None], [bct], "linear")
    s, g, a, r, s2 = 0.4, -0.6, 0.25, -1.0, 0.5
    batch = Transitions(np.array([[s]]), np.array([[g]]), np.array([[a]]), np.array([r]),
                        np.array([[s2]]), np.zeros(1, bool), np.zeros(1, bool))

    # manual chain rule
    a2 = math.tanh(wat[0] * s2 + wat[1] * g + bat)
    y = r + 0.9 * (wct[0] * s2 + wct[1] * g + wct[2] * a2 + bct)
    q = wc[0] * s + wc[1] * g + wc[2] * a + bc
    loss = (q - y) ** 2
    dwc = 2 * (q - y) * np.array([s, g, a])
    dbc = 2 * (q - y)

    def adam1(p, grad, lr):  # first Adam step: m_hat = grad, v_hat = grad^2
        return p - lr * grad / (abs(grad) + 1e-8)

    wc_new = np.array([adam1(w, d, 0.05) for w, d in zip(wc, dwc)])
    bc_new = adam1(bc, dbc, 0.05)
    pre = wa[0] * s + wa[1] * g + ba
    mu = math.tanh(pre)
    q_pi = wc_new[0] * s + wc_new[1] * g + wc_new[2] * mu + bc_new
    dpre = -wc_new[2] * (1 - mu ** 2)
    wa_new = np.array([adam1(wa[0], dpre * s, 0.01), adam1(wa[1], dpre * g, 0.01)])
    ba_new = adam1(ba, dpre, 0.01)

    c_loss, a_loss = train_step(agent, batch)
    assert c_loss == pytest.approx(loss, rel=1e-12)
    assert a_loss == pytest.approx(-q_pi, rel=1e-12)
    np.testing.assert_allclose(agent.critic.layers[0].weight[:, 0], wc_new, rtol=1e-12)
    assert agent.critic.layers[0].bias[0] == pytest.approx(bc_new, rel=1e-12)
    np.testing.assert_allclose(agent.actor.layers[0].weight[:, 0], wa_new, rtol=1e-12)
    assert agent.actor.layers[0].bias[0] == pytest.approx(ba_new, rel=1e-12)


def test_critic_loss_decreases_on_fixed_batch():
    improved = 0
    for trial in range(100):
        rng = np.random.default_rng(100 + trial)
        agent = make_agent(4, 2, 2, rng, hidden=(16, 16))
        batch = random_batch(rng)
        first, _ = train_step(agent, batch)
        second, _ = train_step(agent, batch)
        improved += second <= first
    assert improved >= 80


def test_actor_ascends_linear_critic():
    rng = np.random.default_rng(8)
    agent = make_agent(1, 1, 1, rng, hidden=(4,))
    c = 2.0
    agent.critic = MlpParams([Layer(np.array([[0.0], [0.0], [c]]), [0.0], "linear")])
    batch = Transitions(np.array([[0.3]]), np.array([[0.1]]), np.zeros((1, 1)), np.zeros(1),
                        np.zeros((1, 1)), np.zeros(1, bool), np.zeros(1, bool))
    before = select_action(agent, [0.3], [0.1])[0]
    actor_update(agent, batch)
    after = select_action(agent, [0.3], [0.1])[0]
    assert after > before


def test_checkpoint_roundtrip(tmp_path, agent):
    batch = random_batch(np.random.default_rng(9))
    train_step(agent, batch)
    path = save_checkpoint(agent, tmp_path / "agent.json", epsilon=0.05)
    back, meta = load_checkpoint(path)
    assert meta["epsilon"] == 0.05 and meta["train_steps"] == 1
    for name in ("actor", "critic", "target_actor", "target_critic"):
        assert getattr(back, name).flat().tobytes() == getattr(agent, name).flat().tobytes()
    s = np.random.default_rng(1).normal(size=(5, 4))
    g = np.zeros((5, 2))
    assert np.array_equal(select_action(back, s, g), select_action(agent, s, g))
