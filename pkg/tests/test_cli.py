import csv
import subprocess
import sys

import numpy as np
import pytest

from eastd3.cli import main, read_recipe
from eastd3.config import dump_config, load_config
from eastd3.tensor import load_mlp

TINY = """\
# tiny run for the CLI tests
profile = desk
env = double-integrator   # 2-d state
algo = eas-td3
total_steps = 300
start_timesteps = 100
max_episode_steps = 50
actor_hidden = 8
critic_hidden = 8
batch_size = 8
eval_every = 100
eval_episodes = 2
pso_generations = 2
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def test_train_writes_run_outputs(tmp_path, cfg_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--override", "seed=4", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["actions.csv", "checkpoints", "config.resolved", "metrics.csv"]
    resolved = load_config(out / "config.resolved")
    assert resolved.seed == 4 and resolved.actor_hidden == (8,)
    assert (out / "config.resolved").read_text() == dump_config(resolved)
    assert "final return" in capsys.readouterr().out


def test_checkpoint_header(tmp_path, cfg_path):
    out = tmp_path / "run"
    main(["train", "--config", str(cfg_path), "--out", str(out)])
    raw = (out / "checkpoints" / "actor.mlp").read_bytes()
    header, _, body = raw.partition(b"\n")
    assert header == b"mlp 2 2 8 1"
    assert len(body) == 8 * (2 * 8 + 8 + 8 * 1 + 1)
    net = load_mlp(out / "checkpoints" / "actor.mlp", "tanh", -np.ones(1), np.ones(1))
    assert np.array_equal(net.weights[0].ravel(), np.frombuffer(body[: 16 * 8], "<f8"))


def test_eval_is_repeatable(tmp_path, cfg_path, capsys):
    out = tmp_path / "run"
    main(["train", "--config", str(cfg_path), "--out", str(out)])
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(out / "checkpoints"), "--episodes", "3"]) == 0
    first = capsys.readouterr().out
    main(["eval", "--checkpoint", str(out), "--episodes", "3"])
    assert first == capsys.readouterr().out and "mean_return=" in first


def test_algo_flag_selects_algorithm(tmp_path, cfg_path):
    out = tmp_path / "run"
    argv = ["train", "--config", str(cfg_path), "--algo", "cem-td3", "--override", "cem_population=2", "--out", str(out)]
    assert main(argv) == 0
    assert load_config(out / "config.resolved").algo == "cem-td3"


def test_bad_override_is_reported(cfg_path, capsys):
    assert main(["train", "--config", str(cfg_path), "--override", "no_such_key=1"]) == 2
    assert "no_such_key" in capsys.readouterr().err


def test_recipe_parsing(tmp_path):
    p = tmp_path / "r.cfg"
    p.write_text("profile = desk\nseeds = 0, 2\nsweep.actor_hidden = 8 | 8,8\nsweep.algo = td3|eas-td3\nout = x\n")
    base, swept, seeds, out = read_recipe(p)
    assert base == {"profile": "desk"} and seeds == [0, 2] and str(out) == "x"
    assert swept == {"actor_hidden": ["8", "8,8"], "algo": ["td3", "eas-td3"]}


def test_sweep_summary(tmp_path, capsys):
    recipe = tmp_path / "r.cfg"
    body = "\n".join(line for line in TINY.splitlines() if not line.startswith("algo"))
    recipe.write_text(body + "\nseeds = 0,1\nsweep.algo = td3 | cem-td3\ncem_population = 2\n")
    assert main(["sweep", "--recipe", str(recipe), "--out", str(tmp_path / "sw")]) == 0
    with open(tmp_path / "sw" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["algo"], r["seed"]) for r in rows] == [("td3", "0"), ("td3", "1"), ("cem-td3", "0"), ("cem-td3", "1")]
    assert all(np.isfinite(float(r["final_return"])) for r in rows)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "eastd3", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sweep" in res.stdout
