import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eastd3.cem import ParamDistribution, cem_update
from eastd3.config import profile_config
from eastd3.tensor import Mlp, flatten_params, unflatten_params
from eastd3.trainer import run_training


def _dist(dim=1, **kw):
    return ParamDistribution(np.zeros(dim), np.ones(dim), **kw)


def test_flatten_round_trip(rng):
    net = Mlp.random((3, 5, 4, 2), rng)
    back = unflatten_params(flatten_params(net), net)
    for a, b in zip(net.params, back.params):
        assert np.array_equal(a, b)


def test_zero_vector_unflattens_to_zero_net(rng):
    net = Mlp.random((3, 4, 2), rng)
    assert all(not p.any() for p in unflatten_params(np.zeros(net.n_params), net).params)


def test_elites_mean_example():
    scored = [(np.array([x]), x) for x in (1.0, 2.0, 3.0, 4.0)]
    new = cem_update(_dist(), scored)
    assert new.mean.tolist() == [3.5]
    assert new.var.tolist() == [0.25]


def test_identical_population_hits_floor():
    scored = [(np.array([0.3, -1.0]), float(i)) for i in range(6)]
    new = cem_update(_dist(2, var_floor=1e-4), scored)
    assert np.array_equal(new.mean, [0.3, -1.0])
    assert np.array_equal(new.var, [1e-4, 1e-4])


def test_full_elite_is_plain_moments(rng):
    params = rng.normal(size=(7, 3))
    new = cem_update(_dist(3, elite_frac=1.0, var_floor=0.0), [(p, float(rng.normal())) for p in params])
    assert np.allclose(new.mean, params.mean(axis=0), rtol=0, atol=1e-15)
    assert np.allclose(new.var, params.var(axis=0), rtol=1e-13)


def test_extra_variance_added_and_decayed():
    scored = [(np.array([x]), x) for x in (1.0, 2.0, 3.0, 4.0)]
    new = cem_update(_dist(extra_var=0.1, extra_decay=0.5), scored)
    assert new.var[0] == pytest.approx(0.35, abs=1e-15)
    assert new.extra_var == 0.05


def test_ties_keep_earlier_individuals():
    scored = [(np.array([float(i)]), 1.0) for i in range(4)]
    assert cem_update(_dist(), scored).mean.tolist() == [0.5]


def test_rejects_tiny_population():
    with pytest.raises(ValueError):
        cem_update(_dist(), [(np.zeros(1), 0.0)])


@given(st.integers(0, 2**32 - 1), st.sampled_from(["exp", "cube", "shift"]))
def test_invariant_to_monotone_return_transform(seed, kind):
    rng = np.random.default_rng(seed)
    params = rng.normal(size=(8, 2))
    returns = rng.normal(size=8)
    f = {"exp": np.exp, "cube": lambda r: r**3, "shift": lambda r: 5 * r - 2}[kind]
    a = cem_update(_dist(2), list(zip(params, returns)))
    b = cem_update(_dist(2), list(zip(params, f(returns))))
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.var, b.var)


@pytest.mark.parametrize("seed", range(20))
def test_converges_on_quadratic(seed):
    rng = np.random.default_rng(seed)
    target = rng.uniform(-2, 2)
    dist = ParamDistribution(np.zeros(1), np.ones(1), extra_var=0.05, extra_decay=0.9)
    for _ in range(30):
        pop = dist.sample(rng)
        dist = cem_update(dist, [(p, -float((p[0] - target) ** 2)) for p in pop])
    assert abs(dist.mean[0] - target) < 0.05


def _tiny_cem(**kw):
    base = dict(
        env="double-integrator",
        algo="cem-td3",
        total_steps=1200,
        start_timesteps=300,
        max_episode_steps=100,
        actor_hidden=(8,),
        critic_hidden=(16,),
        cem_population=2,
        batch_size=16,
        eval_every=400,
        eval_episodes=2,
    )
    return profile_config("desk", **{**base, **kw})


def test_cem_td3_smoke(tmp_path):
    res = run_training(_tiny_cem(), tmp_path)
    assert [r.step for r in res.rows] == [400, 800, 1200]
    assert all(np.isfinite(r.eval_mean_return) for r in res.rows)
    assert res.actor_updates > 0
    assert (tmp_path / "metrics.csv").exists() and (tmp_path / "checkpoints" / "manifest.json").exists()
    gens = (tmp_path / "generations.csv").read_text().splitlines()
    assert gens[0] == "step,best_return,mean_return"
    steps = [int(line.split(",")[0]) for line in gens[1:]]
    assert steps == sorted(steps) and steps[-1] >= 1200
    assert all(float(b) >= float(m) for _, b, m in (line.split(",") for line in gens[1:]))


def test_cem_td3_deterministic(tmp_path):
    run_training(_tiny_cem(), tmp_path / "a")
    run_training(_tiny_cem(), tmp_path / "b")
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_single_generation_logs_one_point(tmp_path):
    cfg = _tiny_cem(total_steps=200, eval_every=200, start_timesteps=0)
    res = run_training(cfg, tmp_path)
    assert len(res.rows) == 1 and res.replay_size == 200
    assert len((tmp_path / "generations.csv").read_text().splitlines()) == 2


def test_gradient_free_runs_depend_only_on_seed():
    cfg = _tiny_cem(start_timesteps=10_000, total_steps=600, eval_every=200)
    a, b = run_training(cfg), run_training(cfg)
    c = run_training(cfg.replace(seed=1))
    assert a.agent.critic_updates == 0
    assert [r.eval_mean_return for r in a.rows] == [r.eval_mean_return for r in b.rows]
    assert [r.eval_mean_return for r in a.rows] != [r.eval_mean_return for r in c.rows]
