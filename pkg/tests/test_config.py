import pytest

from src.models.errors import ConfigError
from src.models.learner_config import DQNConfig, IdentifyConfig, PerceptionConfig
from src.utils.config import DEFAULTS, load_config
from tests.conftest import ROOT


def test_missing_file_gives_defaults(tmp_path):
    config = load_config(str(tmp_path / "absent.yaml"))
    assert config == DEFAULTS
    config["qlearner"]["alpha"] = 0.9
    assert DEFAULTS["qlearner"]["alpha"] == 0.1


def test_partial_file_is_merged(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("qlearner:\n  alpha: 0.2\nharness:\n  seeds: [1, 2]\n")
    config = load_config(str(path))
    assert config["qlearner"]["alpha"] == 0.2
    assert config["qlearner"]["gamma"] == 0.95
    assert config["harness"]["seeds"] == [1, 2]
    assert config["perception"] == DEFAULTS["perception"]


def test_shipped_config_matches_defaults():
    assert load_config(f"{ROOT}/config.yaml") == DEFAULTS


@pytest.mark.parametrize("text", ["qlearner: [alpha\n", "- just\n- a list\n"])
def test_bad_files_raise(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_typed_sections():
    config = load_config(None)
    assert PerceptionConfig.from_config(config) == PerceptionConfig()
    assert IdentifyConfig.from_config(config) == IdentifyConfig()
    dqn = DQNConfig.from_config(config, epochs=1000, seed=2)
    assert dqn.hidden == (128, 64)
    assert dqn.decay_steps == 500
    assert dqn.seed == 2
