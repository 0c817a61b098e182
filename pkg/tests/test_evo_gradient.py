import numpy as np
import pytest

from eastd3.envs import EnvSpec
from eastd3.evo_gradient import EvoBatch, apply_evo_update, evo_loss, evo_loss_and_grads, q_filter
from eastd3.stores import Archive, StateActionPair
from eastd3.td3 import Td3Agent, Td3Config
from eastd3.tensor import Mlp, flatten_params

from .helpers import central_diff, rel_err

SPEC2 = EnvSpec(3, 2, -np.ones(2), np.ones(2), 200)


def make_agent(seed=0):
    cfg = Td3Config(actor_hidden=(16,), critic_hidden=(16,))
    return Td3Agent(SPEC2, cfg, np.random.default_rng(seed))


def linear_action_critic(weights):
    """Q(s, a) = weights . a, independent of s."""
    w = np.zeros((5, 1))
    w[3:, 0] = weights
    return Mlp((5, 1), [w], [np.zeros(1)])


def test_filter_direct_cases(rng):
    agent = make_agent()
    agent.critic1 = linear_action_critic([1.0, 0.0])
    s = rng.normal(size=(1, 3))
    mu = agent.act(s)
    better = mu + np.array([[0.05, 0.0]])
    worse = mu - np.array([[0.05, 0.0]])
    same_q = mu + np.array([[0.0, 0.3]])  # only the ignored dimension changes
    assert q_filter(agent, s, better).tolist() == [1.0]
    assert q_filter(agent, s, worse).tolist() == [0.0]
    assert q_filter(agent, s, same_q).tolist() == [0.0]
    assert q_filter(agent, s, mu).tolist() == [0.0]


def test_filter_pure_function(rng):
    agent = make_agent(3)
    s, a = rng.normal(size=(20, 3)), rng.uniform(-1, 1, size=(20, 2))
    assert np.array_equal(q_filter(agent, s, a), q_filter(agent, s, a))


def test_evo_loss_examples():
    net = Mlp.zeros((1, 2), "tanh", -np.ones(2), np.ones(2))
    net.biases[0][:] = np.arctanh([0.1, 0.2])
    batch = EvoBatch(np.zeros((1, 1)), np.array([[0.3, 0.2]]), np.ones(1))
    assert evo_loss(net, batch) == pytest.approx(0.04, abs=1e-15)
    perfect = EvoBatch(np.zeros((1, 1)), net(np.zeros((1, 1))), np.ones(1))
    assert evo_loss(net, perfect) == 0.0


def test_fully_filtered_loss_and_grad(rng):
    actor = make_agent().actor
    batch = EvoBatch(rng.normal(size=(8, 3)), rng.uniform(-1, 1, size=(8, 2)), np.zeros(8))
    loss, grads = evo_loss_and_grads(actor, batch)
    assert loss == 0.0 and all(not g.any() for g in grads)


def test_evo_gradient_fd(rng):
    actor = make_agent(2).actor
    batch = EvoBatch(rng.normal(size=(6, 3)), rng.uniform(-1, 1, size=(6, 2)), np.array([1, 0, 1, 1, 0, 1.0]))
    _, grads = evo_loss_and_grads(actor, batch)
    for p, g in zip(actor.params, grads):
        assert rel_err(g, central_diff(lambda: evo_loss(actor, batch), p)) < 1e-6


def test_masked_mean_matches_direct_formula(rng):
    actor = make_agent(1).actor
    s, ae = rng.normal(size=(5, 3)), rng.uniform(-1, 1, size=(5, 2))
    mask = np.array([1.0, 0.0, 1.0, 0.0, 0.0])
    mu = actor(s)
    direct = sum(mask[i] * np.sum((mu[i] - ae[i]) ** 2) for i in range(5)) / 5
    assert evo_loss(actor, EvoBatch(s, ae, mask)) == pytest.approx(direct, rel=1e-14)


def test_empty_archive_is_noop(rng):
    agent = make_agent()
    before = flatten_params(agent.actor).copy()
    upd = apply_evo_update(agent, Archive(4, 3, 2), 8, rng)
    assert upd.skipped and np.array_equal(before, flatten_params(agent.actor))


def _archive_with(s, a_evo):
    arch = Archive(8, 3, 2)
    for si, ai in zip(s, a_evo):
        arch.push(StateActionPair(si, ai))
    return arch


def test_filtered_pair_leaves_actor_bit_identical(rng):
    agent = make_agent()
    agent.critic1 = linear_action_critic([1.0, 1.0])
    # give the shared Adam state some momentum first
    agent.update_actor(rng.normal(size=(4, 3)))
    s = rng.normal(size=(1, 3))
    worse = np.clip(agent.act(s) - 0.2, -1, 1)
    arch = _archive_with(s, worse)
    before = flatten_params(agent.actor).copy()
    steps = agent.actor_opt.step
    upd = apply_evo_update(agent, arch, 16, rng)
    assert upd.skipped and upd.mask_rate == 0.0
    assert np.array_equal(before, flatten_params(agent.actor))
    assert agent.actor_opt.step == steps
    upd = apply_evo_update(agent, arch, 16, rng, q_filter_enabled=False)
    assert not upd.skipped and not np.array_equal(before, flatten_params(agent.actor))


def test_repeated_updates_contract_toward_target(rng):
    agent = make_agent(5)
    agent.critic1 = linear_action_critic([1.0, 1.0])
    s = rng.normal(size=(1, 3))
    target = np.array([[0.9, 0.9]])
    arch = _archive_with(s, target)
    dists = [np.linalg.norm(agent.act(s) - target)]
    for _ in range(30):
        upd = apply_evo_update(agent, arch, 4, rng)
        assert not upd.skipped
        dists.append(np.linalg.norm(agent.act(s) - target))
    assert dists[-1] < dists[0]
    assert all(b < a for a, b in zip(dists, dists[1:]))


def test_reported_loss_matches_recomputation(rng):
    agent = make_agent(7)
    s = rng.normal(size=(6, 3))
    arch = _archive_with(s, rng.uniform(-1, 1, size=(6, 2)))
    batch_rng = np.random.default_rng(4)
    idx = np.random.default_rng(4).integers(0, 6, size=5)
    from eastd3.evo_gradient import q_filter as qf

    mask = qf(agent, arch.s[idx], arch.a_evo[idx])
    expected = evo_loss(agent.actor, EvoBatch(arch.s[idx], arch.a_evo[idx], mask))
    upd = apply_evo_update(agent, arch, 5, batch_rng, q_filter_enabled=True)
    if mask.any():
        assert upd.loss == pytest.approx(expected, rel=1e-14)
        assert upd.mask_rate == mask.mean()
    else:
        assert upd.skipped
