"""Engine configuration: one object covering training, reward, noise,
environment, server and data settings, loadable from an INI file with
those sections. CLI flags override file values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from deepdial.constraints import PROBABILITY_THRESHOLD
from deepdial.datapack import DataError
from deepdial.dqn import HyperParams
from deepdial.environment import DEFAULT_MAX_TURNS, EnvConfig
from deepdial.reward import RewardConfig
from deepdial.simulator import NoiseConfig


@dataclass
class EngineConfig:
    hyper: HyperParams = field(default_factory=HyperParams)
    reward: RewardConfig = field(default_factory=RewardConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    max_turns: int = DEFAULT_MAX_TURNS
    patience: int = 6
    p_end: float = 1.0
    probability_threshold: float = PROBABILITY_THRESHOLD
    human_confidence: float = 1.0
    data_dir: str | None = None
    language: str = "en"
    seed: int = 0
    host: str = "127.0.0.1"
    port: int = 8201
    ws_port: int = 8202
    idle_timeout: float = 120.0
    demo_dialogues: int = 20
    demo_seed: int = 7

    def env_config(self) -> EnvConfig:
        return EnvConfig(max_turns=self.max_turns, noise=self.noise,
                         reward=self.reward, p_end=self.p_end,
                         probability_threshold=self.probability_threshold,
                         human_confidence=self.human_confidence,
                         patience=self.patience)


def default_config() -> EngineConfig:
    return EngineConfig()


_SECTIONS = {
    "training": {
        "gamma": ("hyper", "gamma", float),
        "epsilon_start": ("hyper", "epsilon_start", float),
        "epsilon_min": ("hyper", "epsilon_min", float),
        "epsilon_anneal_steps": ("hyper", "epsilon_anneal_steps", int),
        "batch_size": ("hyper", "batch_size", int),
        "learning_steps": ("hyper", "total_learning_steps", int),
        "target_sync_period": ("hyper", "target_sync_period", int),
        "learning_rate": ("hyper", "learning_rate", float),
        "replay_warmup": ("hyper", "replay_warmup", int),
        "replay_capacity": ("hyper", "replay_capacity", int),
        "max_episodes": ("hyper", "max_episodes", int),
    },
    "reward": {
        "w": ("reward", "w", float),
        "dialogue_length_penalty": ("reward", "dialogue_length_penalty", float),
        "slots_to_confirm": ("reward", "slots_to_confirm", int),
    },
    "noise": {
        "enabled": ("noise", "enabled", None),
        "distortion_threshold": ("noise", "distortion_threshold", float),
    },
    "environment": {
        "max_turns": (None, "max_turns", int),
        "patience": (None, "patience", int),
        "p_end": (None, "p_end", float),
        "probability_threshold": (None, "probability_threshold", float),
        "human_confidence": (None, "human_confidence", float),
    },
    "server": {
        "host": (None, "host", str),
        "port": (None, "port", int),
        "ws_port": (None, "ws_port", int),
        "idle_timeout": (None, "idle_timeout", float),
    },
    "data": {
        "dir": (None, "data_dir", str),
        "language": (None, "language", str),
        "demo_dialogues": (None, "demo_dialogues", int),
        "demo_seed": (None, "demo_seed", int),
    },
    "run": {
        "seed": (None, "seed", int),
    },
}


def load_config(path: str | Path) -> EngineConfig:
    """Read an INI file into an EngineConfig; unknown keys are errors."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise DataError(f"{path}: {exc}") from exc

    cfg = EngineConfig()
    # Sub-configs are frozen-ish value objects; collect overrides then rebuild.
    pending: dict[str, dict] = {"hyper": {}, "reward": {}, "noise": {}}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise DataError(f"{path}: unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise DataError(f"{path}: unknown key {key!r} in [{section}]")
            target, attr, conv = _SECTIONS[section][key]
            try:
                value = parser.getboolean(section, key) if conv is None else conv(raw)
            except ValueError as exc:
                raise DataError(f"{path}: bad value for {section}.{key}: {raw!r}") from exc
            if target is None:
                setattr(cfg, attr, value)
            else:
                pending[target][attr] = value
    if pending["hyper"]:
        cfg.hyper = _rebuild(HyperParams, cfg.hyper, pending["hyper"])
    if pending["reward"]:
        cfg.reward = _rebuild(RewardConfig, cfg.reward, pending["reward"])
    if pending["noise"]:
        cfg.noise = _rebuild(NoiseConfig, cfg.noise, pending["noise"])
    return cfg


def _rebuild(cls, current, overrides: dict):
    values = {f.name: getattr(current, f.name) for f in fields(cls)}
    values.update(overrides)
    try:
        return cls(**values)
    except ValueError as exc:
        raise DataError(f"invalid configuration: {exc}") from exc
