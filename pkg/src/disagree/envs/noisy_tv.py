from __future__ import annotations

import numpy as np

from ..rng import stream
from .base import Env

UP, DOWN, LEFT, RIGHT, TOGGLE = range(5)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
TV_DIM = 8


class NoisyTvGrid(Env):
    """N x N gridworld with a sparse goal and an optional noisy TV.

    Observation is the position one-hot followed by an 8-dim TV vector that
    is fresh uniform noise on every step while the TV is on and zeros while
    it is off. The toggle action switches the TV; without a TV it is a no-op.
    """

    name = "noisy-tv-grid"

    def __init__(self, seed: int = 0, size: int = 8, tv: bool = True, horizon: int = 128,
                 fixed_start: bool = False, tv_start_on: bool = True):
        super().__init__(seed, stream(seed, "env/noisy-tv-grid"))
        self.size = size
        self.tv = tv
        self.horizon = horizon
        self.fixed_start = fixed_start
        self.tv_start_on = tv_start_on
        self.d_obs = size * size + TV_DIM
        self.action_count = 5
        self.goal = (size - 1, size - 1)
        self.start = (0, 0)
        self.pos = self.start
        self.tv_on = False

    def options(self) -> dict:
        return {"size": self.size, "tv": self.tv, "fixed_start": self.fixed_start,
                "tv_start_on": self.tv_start_on, "horizon": self.horizon}

    def _observe(self) -> np.ndarray:
        obs = np.zeros(self.d_obs)
        obs[self.pos[0] * self.size + self.pos[1]] = 1.0
        if self.tv_on:
            obs[self.size * self.size:] = self.rng.uniform(0.0, 1.0, size=TV_DIM)
        return obs

    def _reset(self) -> np.ndarray:
        if self.fixed_start:
            self.pos = self.start
        else:
            cells = self.size * self.size - 1  # every cell except the goal
            idx = int(self.rng.integers(0, cells))
            goal_idx = self.goal[0] * self.size + self.goal[1]
            idx += idx >= goal_idx
            self.pos = divmod(idx, self.size)
        self.tv_on = self.tv and self.tv_start_on
        return self._observe()

    def _step(self, action: int):
        info = set()
        if action == TOGGLE:
            if self.tv:
                self.tv_on = not self.tv_on
        else:
            dr, dc = _MOVES[action]
            r = min(max(self.pos[0] + dr, 0), self.size - 1)
            c = min(max(self.pos[1] + dc, 0), self.size - 1)
            self.pos = (r, c)
        at_goal = self.pos == self.goal
        if self.tv_on:
            info.add("tv-on")
        if at_goal:
            info.add("goal")
        return self._observe(), at_goal, 1.0 if at_goal else 0.0, info

    def shortest_action(self, pos: tuple[int, int]) -> int:
        """Action on a shortest path to the goal (down first, then right)."""
        if pos[0] < self.goal[0]:
            return DOWN
        if pos[1] < self.goal[1]:
            return RIGHT
        if pos[0] > self.goal[0]:
            return UP
        return LEFT
