from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Ring buffer of encoded transitions with per-member bootstrap masks.

    Each inserted transition draws one Bernoulli(keep) bit per ensemble
    member at insertion time; the bit is never redrawn. ``stamp`` records the
    env step at which the transition was collected.
    """

    def __init__(self, capacity: int, d_feat: int, members: int, keep: float,
                 rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if not 0.0 < keep <= 1.0:
            raise ValueError("bootstrap keep probability must lie in (0, 1]")
        self.capacity = capacity
        self.members = members
        self.keep = keep
        self.rng = rng
        self.feat = np.zeros((capacity, d_feat))
        self.action = np.zeros(capacity, dtype=np.int64)
        self.next_feat = np.zeros((capacity, d_feat))
        self.mask = np.zeros((capacity, members), dtype=bool)
        self.stamp = np.zeros(capacity, dtype=np.int64)
        self.size = 0
        self.inserted = 0  # total ever inserted; ring position = inserted % capacity

    def __len__(self) -> int:
        return self.size

    def add(self, feat, action, next_feat, stamp) -> None:
        feat = np.atleast_2d(feat)
        next_feat = np.atleast_2d(next_feat)
        action = np.atleast_1d(np.asarray(action, dtype=np.int64))
        stamp = np.broadcast_to(np.asarray(stamp, dtype=np.int64), action.shape)
        n = len(action)
        masks = self.rng.random((n, self.members)) < self.keep
        pos = (self.inserted + np.arange(n)) % self.capacity
        self.feat[pos] = feat
        self.action[pos] = action
        self.next_feat[pos] = next_feat
        self.mask[pos] = masks
        self.stamp[pos] = stamp
        self.inserted += n
        self.size = min(self.capacity, self.size + n)

    def recent(self, n: int | None = None) -> np.ndarray:
        """Slot indices of the ``n`` most recent transitions (all if None)."""
        n = self.size if n is None else min(n, self.size)
        return (self.inserted - n + np.arange(n)) % self.capacity
