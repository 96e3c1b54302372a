import copy
import os
from typing import Any, Dict, Optional

import yaml

from src.models.errors import ConfigError

DEFAULTS: Dict[str, Any] = {
    "paths": {
        "specs_dir": "./data/specs",
        "output_root": "./runs",
    },
    "engine": {"cell_px": 4},
    "perception": {"n_static": 10, "agent_object_min": 1, "max_jump": 2},
    "agent_id": {
        "window": 50,
        "trials": 10,
        "motion_threshold": 0.8,
        "fire_presses": 5,
        "fire_threshold": 3,
    },
    "encoder": {"max_k": 8},
    "qlearner": {
        "alpha": 0.1,
        "gamma": 0.95,
        "epsilon_start": 1.0,
        "epsilon_end": 0.01,
        "decay_fraction": 0.5,
    },
    "dqn": {
        "hidden": [128, 64],
        "batch_size": 32,
        "capacity": 50000,
        "warmup": 32,
        "lr": 0.001,
        "gamma": 0.95,
        "target_sync": 1000,
        "cell_px": 1,
    },
    "harness": {
        "epochs": 500000,
        "dqn_epochs": 1000000,
        "eval_runs": 20,
        "eval_interval": 10000,
        "warmup_steps": 2000,
        "seeds": [0],
        "eval_seed_base": 10000,
        "variant_seed": 7,
    },
    "logging": {"level": "INFO", "progress": True},
}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = "config.yaml") -> Dict[str, Any]:
    """Read config.yaml over the built-in defaults; a missing file yields the defaults."""
    if not config_path or not os.path.exists(config_path):
        return copy.deepcopy(DEFAULTS)
    with open(config_path, "r") as f:
        try:
            config = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{config_path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping")
    return _deep_merge(DEFAULTS, config)
