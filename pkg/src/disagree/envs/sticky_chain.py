from __future__ import annotations

import numpy as np

from ..rng import stream
from .base import Env

LEFT, RIGHT = 0, 1


class StickyChain(Env):
    """1-D chain where the previously executed action may repeat.

    With probability ``p_sticky`` the action executed on the previous step
    is executed again in place of the chosen one. Every step that ends on
    cell ``length - 1`` pays an evaluation-only +1.
    """

    name = "sticky-chain"

    def __init__(self, seed: int = 0, length: int = 32, p_sticky: float = 0.25, horizon: int = 100):
        super().__init__(seed, stream(seed, "env/sticky-chain"))
        if not 0.0 <= p_sticky <= 1.0:
            raise ValueError("p_sticky must lie in [0, 1]")
        self.length = length
        self.p_sticky = p_sticky
        self.horizon = horizon
        self.d_obs = length
        self.action_count = 2
        self.pos = 0
        self.prev_action: int | None = None

    def options(self) -> dict:
        return {"length": self.length, "p_sticky": self.p_sticky, "horizon": self.horizon}

    def _observe(self) -> np.ndarray:
        obs = np.zeros(self.length)
        obs[self.pos] = 1.0
        return obs

    def _reset(self) -> np.ndarray:
        self.pos = 0
        self.prev_action = None
        return self._observe()

    def _step(self, action: int):
        executed = action
        # the draw happens every step so the stream does not depend on history
        sticky = self.rng.random() < self.p_sticky
        if sticky and self.prev_action is not None:
            executed = self.prev_action
        self.prev_action = executed
        self.pos = min(max(self.pos + (1 if executed == RIGHT else -1), 0), self.length - 1)
        info = set()
        if executed != action:
            info.add("sticky")
        at_end = self.pos == self.length - 1
        if at_end:
            info.add("far-end")
        return self._observe(), False, 1.0 if at_end else 0.0, info
