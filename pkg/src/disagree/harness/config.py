"""Run configuration: a flat ``key = value`` text format.

One key per line, ``#`` starts a comment. Environment constructor options
are written as ``env.<option> = value``. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import inspect
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..envs import REGISTRY
from ..features import ENCODER_KINDS
from ..intrinsic import REWARD_KINDS

OPTIMIZERS = ("ppo", "reinforce", "differentiable", "combined")
ACTION_ENCODINGS = ("auto", "onehot")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    label: str = ""
    env: str = "noisy-pairs"
    env_options: dict = field(default_factory=dict)
    seed: int = 0
    total_steps: int = 10_240
    rollout: int = 512
    num_envs: int = 8
    # features
    encoder: str = "identity"
    d_feat: int = 32
    encoder_hidden: int = 64
    # intrinsic reward and ensemble
    reward: str = "disagreement"
    action_encoding: str = "auto"  # auto: the env's structured code if it has one; onehot: plain one-hot
    k: int = 5
    ensemble_hidden: int = 64
    bootstrap_keep: float = 0.7
    ensemble_lr: float = 1e-3
    ensemble_epochs: int = 4
    ensemble_batch: int = 64
    train_window: int = 0  # transitions eligible for training; 0 means the newest rollout
    buffer_capacity: int = 65_536
    drop_p: float = 0.2
    dropout_passes: int = 0  # 0 means k
    normalize_rewards: bool = True
    intrinsic_coef: float = 1.0
    extrinsic_coef: float = -1.0  # negative means 1 for noisy-tv-grid, 0 elsewhere
    # policy
    optimizer: str = "ppo"
    policy_hidden: int = 64
    policy_lr: float = 3e-4
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    ppo_epochs: int = 4
    minibatch: int = 64
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    reinforce_decay: float = 0.9
    horizon: int = 1
    mix: float = 0.5
    diff_steps: int = 4
    # evaluation
    eval_every: int = 10
    eval_episodes: int = 20

    def __post_init__(self):
        validate(self)

    @property
    def rounds(self) -> int:
        return self.total_steps // self.rollout

    @property
    def steps_per_env(self) -> int:
        return self.rollout // self.num_envs

    @property
    def resolved_extrinsic_coef(self) -> float:
        if self.extrinsic_coef >= 0:
            return self.extrinsic_coef
        return 1.0 if self.env == "noisy-tv-grid" else 0.0

    @property
    def resolved_dropout_passes(self) -> int:
        return self.dropout_passes or self.k

    @property
    def resolved_window(self) -> int:
        return self.train_window or self.rollout

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["env_options"] = dict(sorted(self.env_options.items()))
        return out

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "env_options":
                lines += [f"env.{k} = {_fmt(v)}" for k, v in sorted(self.env_options.items())]
            else:
                lines.append(f"{f.name} = {_fmt(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _env_option_names(env: str) -> dict[str, inspect.Parameter]:
    params = inspect.signature(REGISTRY[env].__init__).parameters
    return {k: p for k, p in params.items() if k not in ("self", "seed")}


def validate(cfg: RunConfig) -> None:
    def need(ok: bool, msg: str):
        if not ok:
            raise ConfigError(msg)

    need(cfg.env in REGISTRY, f"unknown env {cfg.env!r}; known: {', '.join(sorted(REGISTRY))}")
    known = _env_option_names(cfg.env)
    for key in cfg.env_options:
        need(key in known, f"unknown option env.{key} for {cfg.env}; known: {', '.join(known)}")
    need(cfg.encoder in ENCODER_KINDS, f"unknown encoder {cfg.encoder!r}; known: {', '.join(ENCODER_KINDS)}")
    need(cfg.reward in REWARD_KINDS, f"unknown reward {cfg.reward!r}; known: {', '.join(REWARD_KINDS)}")
    need(cfg.action_encoding in ACTION_ENCODINGS,
         f"unknown action_encoding {cfg.action_encoding!r}; known: {', '.join(ACTION_ENCODINGS)}")
    need(cfg.optimizer in OPTIMIZERS, f"unknown optimizer {cfg.optimizer!r}; known: {', '.join(OPTIMIZERS)}")
    need(cfg.rollout >= 1 and cfg.num_envs >= 1, "rollout and num_envs must be positive")
    need(cfg.rollout % cfg.num_envs == 0, "rollout must be a multiple of num_envs")
    need(cfg.total_steps == 0 or cfg.total_steps >= cfg.rollout,
         "total_steps must be 0 or at least one rollout")
    need(cfg.k >= 2, "k must be at least 2")
    need(0.0 < cfg.bootstrap_keep <= 1.0, "bootstrap_keep must lie in (0, 1]")
    need(0.0 <= cfg.drop_p < 1.0, "drop_p must lie in [0, 1)")
    need(0.0 <= cfg.gamma <= 1.0 and 0.0 <= cfg.lam <= 1.0, "gamma and lam must lie in [0, 1]")
    need(0.0 <= cfg.mix <= 1.0, "mix must lie in [0, 1]")
    need(cfg.optimizer in ("ppo", "reinforce") or cfg.reward != "dropout-disagreement",
         f"optimizer {cfg.optimizer} differentiates through the ensemble; use an ensemble reward")
    need(1 <= cfg.horizon <= 5, "horizon must lie in 1..5")
    need(cfg.eval_every >= 1 and cfg.eval_episodes >= 1, "eval cadence and episodes must be positive")
    need(cfg.buffer_capacity >= cfg.resolved_window, "buffer_capacity is smaller than the training window")


def _convert(raw: str, annotation, key: str):
    raw = raw.strip()
    try:
        if annotation in (bool, "bool"):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if annotation in (int, "int"):
            return int(raw.replace("_", ""))
        if annotation in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(annotation, '__name__', annotation)}") from None
    return raw


def env_option_value(env: str, key: str, raw: str):
    known = _env_option_names(env)
    if key not in known:
        raise ConfigError(f"unknown option env.{key} for {env}; known: {', '.join(known)}")
    default = known[key].default
    kind = type(default) if default is not inspect.Parameter.empty else str
    return _convert(raw, kind.__name__, f"env.{key}")


def parse_pairs(pairs: Iterable[tuple[str, str]], base: RunConfig | None = None) -> RunConfig:
    """Apply (key, raw value) pairs on top of ``base`` (defaults if None)."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "env_options"}
    values = (base or RunConfig()).to_dict()
    env_raw: dict[str, str] = {}
    for key, raw in pairs:
        key = key.strip()
        if key.startswith("env."):
            env_raw[key[4:]] = raw
        elif key in fields:
            values[key] = _convert(raw, fields[key].type, key)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if values["env"] not in REGISTRY:
        raise ConfigError(f"unknown env {values['env']!r}; known: {', '.join(sorted(REGISTRY))}")
    if base is not None and values["env"] != base.env:
        values["env_options"] = {}
    options = dict(values["env_options"])
    for key, raw in env_raw.items():
        options[key] = env_option_value(values["env"], key, raw)
    values["env_options"] = options
    return RunConfig(**values)


def parse_text(text: str, base: RunConfig | None = None) -> RunConfig:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        pairs.append((key, raw))
    return parse_pairs(pairs, base)


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    return key, raw


def load_config(path: str | Path, overrides: Iterable[str] = ()) -> RunConfig:
    """Read a config file, then apply ``key=value`` overrides in order."""
    cfg = parse_text(Path(path).read_text())
    pairs = [parse_override(o) for o in overrides]
    return parse_pairs(pairs, cfg) if pairs else cfg


PRESET_DIR = Path(__file__).parent / "presets"


def preset_path(name: str) -> Path:
    path = PRESET_DIR / f"{name}.cfg"
    if not path.exists():
        known = sorted(p.stem for p in PRESET_DIR.glob("*.cfg"))
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(known)}")
    return path
