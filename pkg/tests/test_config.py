import pytest
import tomli

from driftbench.config import RunConfig, data_root, parse_value
from driftbench.errors import FormatError, InvalidInputError


def test_defaults_match_protocol():
    cfg = RunConfig()
    assert cfg["collect"].flights == 100 and cfg["eval"].runs == 10 and cfg["acd"].trajectories == 25
    assert cfg["bench"].population == 10 and cfg["train"].epochs == 20


def test_file_then_overrides(tmp_path):
    f = tmp_path / "run.toml"
    f.write_text('[train]\nepochs = 3\nlr = 0.001\n[env.canyon]\nwidth = 3.5\n[policy]\nchannels = [4, 8]\n')
    cfg = RunConfig.load(f, ["train.epochs=5", "eval.runs=4"])
    assert cfg["train"].epochs == 5 and cfg["train"].lr == 0.001 and cfg["eval"].runs == 4
    assert cfg["env.canyon"].width == 3.5 and cfg["policy"].channels == (4, 8)
    assert cfg.env_params()["canyon"].width == 3.5


def test_resolved_round_trips(tmp_path):
    cfg = RunConfig.load(None, ["collect.kinds=canyon", "policy.arch=auxd"])
    path = cfg.write_resolved(tmp_path)
    again = RunConfig()
    again.apply_dict(tomli.loads(path.read_text()))
    assert again.to_toml() == cfg.to_toml()


@pytest.mark.parametrize("override", ["nosuch.key=1", "train.nosuch=1", "train.epochs=abc", "train.epochs=1.5",
                                      "noequals", "policy.arch=vgg", "train.batch_size=0"])
def test_bad_overrides(override):
    with pytest.raises(InvalidInputError):
        RunConfig.load(None, [override])


def test_missing_or_broken_file(tmp_path):
    with pytest.raises(FormatError):
        RunConfig.load(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[train\n")
    with pytest.raises(InvalidInputError):
        RunConfig.load(bad)


def test_parse_value():
    assert parse_value("3") == 3 and parse_value("0.5") == 0.5 and parse_value("[1, 2]") == [1, 2]
    assert parse_value("canyon,forest") == "canyon,forest"


def test_data_root_env(monkeypatch):
    monkeypatch.setenv("DRIFTBENCH_DATA", "/tmp/x")
    assert str(data_root()) == "/tmp/x"
    monkeypatch.delenv("DRIFTBENCH_DATA")
    assert str(data_root()) == "data"
