from __future__ import annotations

import numpy as np

from ..rng import stream
from .base import Env

_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


class TouchTable(Env):
    """One-step tabletop with a factored (cell, orientation, gripper) action.

    ``objects`` objects sit on an L x L grid, each with a type in {0, 1}.
    An action touches an object when its cell is within Chebyshev distance 1
    of the object and its gripper mode equals the object's type; the object
    then moves to a random free neighbouring cell. Orientation does not
    affect contact. The observation is a two-channel occupancy map (one
    channel per object type).

    The placement is drawn once and restored on every reset, unless
    ``random_placement`` is set. It comes from ``layout_seed`` when that is
    non-negative (so differently seeded instances can share one table) and
    from ``seed`` otherwise.
    """

    name = "touch-table"

    def __init__(self, seed: int = 0, size: int = 16, orientations: int = 4, modes: int = 2,
                 objects: int = 1, random_placement: bool = False, layout_seed: int = -1):
        super().__init__(seed, stream(seed, "env/touch-table"))
        if objects < 1 or objects > size * size:
            raise ValueError("object count must lie in [1, size*size]")
        self.size = size
        self.orientations = orientations
        self.modes = modes
        self.n_objects = objects
        self.random_placement = random_placement
        self.layout_seed = layout_seed
        self.d_obs = modes * size * size
        self.action_count = size * size * orientations * modes
        self.horizon = 1
        layout = stream(layout_seed if layout_seed >= 0 else seed, "env/touch-table/layout")
        self.initial_cells, self.types = self._place(layout)
        self.cells = list(self.initial_cells)

    def options(self) -> dict:
        return {"size": self.size, "orientations": self.orientations, "modes": self.modes,
                "objects": self.n_objects, "random_placement": self.random_placement,
                "layout_seed": self.layout_seed}

    def _place(self, rng: np.random.Generator):
        flat = rng.choice(self.size * self.size, size=self.n_objects, replace=False)
        cells = [divmod(int(c), self.size) for c in flat]
        types = [int(t) for t in rng.integers(0, self.modes, size=self.n_objects)]
        return cells, types

    def decode(self, action: int) -> tuple[int, int, int, int]:
        """Split an action index into (row, col, orientation, mode)."""
        cell, rest = divmod(action, self.orientations * self.modes)
        orient, mode = divmod(rest, self.modes)
        row, col = divmod(cell, self.size)
        return row, col, orient, mode

    def encode_action(self, row: int, col: int, orient: int, mode: int) -> int:
        return ((row * self.size + col) * self.orientations + orient) * self.modes + mode

    def action_code(self) -> np.ndarray:
        """Concatenated one-hots of (row, col, orientation, mode) for every action."""
        L, O, M = self.size, self.orientations, self.modes
        code = np.zeros((self.action_count, 2 * L + O + M))
        for a in range(self.action_count):
            row, col, orient, mode = self.decode(a)
            code[a, [row, L + col, 2 * L + orient, 2 * L + O + mode]] = 1.0
        return code

    def _observe(self) -> np.ndarray:
        obs = np.zeros((self.modes, self.size, self.size))
        for (r, c), t in zip(self.cells, self.types):
            obs[t, r, c] = 1.0
        return obs.reshape(-1)

    def _reset(self) -> np.ndarray:
        if self.random_placement:
            self.cells, self.types = self._place(self.rng)
        else:
            self.cells = list(self.initial_cells)
        return self._observe()

    def touched(self, action: int) -> int | None:
        row, col, _, mode = self.decode(action)
        for i, ((r, c), t) in enumerate(zip(self.cells, self.types)):
            if max(abs(r - row), abs(c - col)) <= 1 and t == mode:
                return i
        return None

    def _step(self, action: int):
        hit = self.touched(action)
        info = set()
        if hit is not None:
            info.add("touched-object")
            r, c = self.cells[hit]
            occupied = set(self.cells)
            free = [(r + dr, c + dc) for dr, dc in _NEIGHBOURS
                    if 0 <= r + dr < self.size and 0 <= c + dc < self.size
                    and (r + dr, c + dc) not in occupied]
            if free:
                self.cells[hit] = free[int(self.rng.integers(0, len(free)))]
        return self._observe(), False, 0.0, info
