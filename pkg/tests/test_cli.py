import pytest

from disagree.cli import main
from disagree.harness import RunLog

SMALL_CFG = """\
label = tiny
env = noisy-tv-grid
total_steps = 256
rollout = 128
num_envs = 4
eval_every = 1
eval_episodes = 2
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(SMALL_CFG)
    return path


def test_run_writes_log_and_agent(tmp_path, cfg_file, capsys):
    out = tmp_path / "run.csv"
    assert main(["run", "--config", str(cfg_file), "--out", str(out), "--set", "seed=3", "-q"]) == 0
    lg = RunLog.read(out)
    assert len(lg) == 2 and lg.meta["config"]["seed"] == 3
    assert (tmp_path / "run.csv.agent").exists()
    assert "wrote" in capsys.readouterr().out


def test_eval_loads_checkpoint(tmp_path, cfg_file, capsys):
    out = tmp_path / "run.csv"
    main(["run", "--config", str(cfg_file), "--out", str(out), "-q"])
    capsys.readouterr()
    code = main(["eval", "--checkpoint", str(out) + ".agent", "--env", "noisy-tv-grid", "--episodes", "3",
                 "--option", "horizon=20"])
    assert code == 0
    text = capsys.readouterr().out
    assert "episodes 3" in text and "goal rate" in text


def test_eval_rejects_mismatched_env(tmp_path, cfg_file, capsys):
    out = tmp_path / "run.csv"
    main(["run", "--config", str(cfg_file), "--out", str(out), "-q"])
    assert main(["eval", "--checkpoint", str(out) + ".agent", "--env", "sticky-chain", "--episodes", "1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_compare_prints_table(tmp_path, cfg_file, capsys):
    paths = []
    for seed in (0, 1):
        out = tmp_path / f"s{seed}.csv"
        main(["run", "--config", str(cfg_file), "--out", str(out), "--set", f"seed={seed}", "-q"])
        paths.append(str(out))
    capsys.readouterr()
    assert main(["compare", "--metric", "intrinsic_mean", "--window", "2", *paths]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split()[:2] == ["tiny", "2"]


def test_bad_config_key_exits_with_error(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("bogus = 1\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "x.csv")]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_missing_config_exits_with_error(tmp_path, capsys):
    assert main(["run", "--config", "no-such-file-or-preset", "--out", str(tmp_path / "x.csv")]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


@pytest.mark.parametrize("k,dim", [(2, 1), (5, 32), (9, 3)])
def test_oracle_variance(k, dim, capsys):
    assert main(["oracle", "variance", str(k), str(dim), "--cases", "4"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 6 and out[-1].startswith("max relative diff")


def test_oracle_rejects_single_member(capsys):
    assert main(["oracle", "variance", "1", "3"]) == 2
