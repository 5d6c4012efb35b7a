from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EnvError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvDescriptor:
    name: str
    d_obs: int
    action_count: int
    horizon: int
    seed: int
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    next_obs: np.ndarray
    done: bool
    extrinsic: float = 0.0
    info: frozenset[str] = frozenset()


class Env:
    """Seeded single-threaded environment.

    Subclasses implement ``_reset`` (returns the first observation) and
    ``_step`` (returns next_obs, terminal, extrinsic, info tags). The base
    class enforces the episode protocol and the horizon.
    """

    name = "env"
    d_obs: int
    action_count: int
    horizon: int

    def __init__(self, seed: int, rng: np.random.Generator):
        self.seed = seed
        self.rng = rng
        self.t = 0
        self.steps_taken = 0
        self.done = True
        self._obs: np.ndarray | None = None

    @property
    def descriptor(self) -> EnvDescriptor:
        return EnvDescriptor(self.name, self.d_obs, self.action_count, self.horizon,
                             self.seed, self.options())

    def options(self) -> dict:
        return {}

    def action_code(self) -> np.ndarray | None:
        """Structured action encoding for forward models (actions x width), or None for plain one-hot."""
        return None

    def reset(self) -> np.ndarray:
        self.t = 0
        self.done = False
        self._obs = self._reset()
        return self._obs.copy()

    def step(self, action: int) -> Transition:
        if self.done:
            raise EnvError(f"{self.name}: step called on a finished episode (reset first)")
        action = int(action)
        if not 0 <= action < self.action_count:
            raise EnvError(f"{self.name}: action {action} outside [0, {self.action_count})")
        obs = self._obs
        next_obs, terminal, extrinsic, info = self._step(action)
        self.t += 1
        self.steps_taken += 1
        self.done = bool(terminal or self.t >= self.horizon)
        self._obs = next_obs
        return Transition(obs.copy(), action, next_obs.copy(), self.done, float(extrinsic), frozenset(info))

    def _reset(self) -> np.ndarray:
        raise NotImplementedError

    def _step(self, action: int):
        raise NotImplementedError
