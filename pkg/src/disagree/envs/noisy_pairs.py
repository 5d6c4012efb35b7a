from __future__ import annotations

import numpy as np

from ..rng import stream
from .base import Env

N_CLASSES = 10


class NoisyPairs(Env):
    """One-step environment with a predictable and an unpredictable start class.

    States are Gaussian samples around ten fixed unit prototypes. A class-0
    state moves to a fresh class-0 sample; a class-1 state moves to a sample
    of a class drawn uniformly from 2..9. Actions are ignored.
    """

    name = "noisy-pairs"

    def __init__(self, seed: int = 0, d_obs: int = 16, sigma: float = 0.1, action_count: int = 2):
        super().__init__(seed, stream(seed, "env/noisy-pairs"))
        self.d_obs = d_obs
        self.sigma = sigma
        self.action_count = action_count
        self.horizon = 1
        protos = stream(seed, "env/noisy-pairs/prototypes").normal(size=(N_CLASSES, d_obs))
        self.prototypes = protos / np.linalg.norm(protos, axis=1, keepdims=True)
        self.state_class = -1

    def options(self) -> dict:
        return {"d_obs": self.d_obs, "sigma": self.sigma}

    def sample(self, cls: int) -> np.ndarray:
        return self.prototypes[cls] + self.sigma * self.rng.normal(size=self.d_obs)

    def _reset(self) -> np.ndarray:
        self.state_class = int(self.rng.integers(0, 2))
        return self.sample(self.state_class)

    def _step(self, action: int):
        start = self.state_class
        nxt = 0 if start == 0 else int(self.rng.integers(2, N_CLASSES))
        self.state_class = nxt
        info = {f"state-class={start}", f"next-class={nxt}"}
        return self.sample(nxt), False, 0.0, info
