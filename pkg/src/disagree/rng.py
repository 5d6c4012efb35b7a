"""Keyed random streams.

Every consumer (an environment instance, an ensemble member, the policy, the
bootstrap masks) draws from its own Philox generator, keyed by the master
seed, a stream name and an index. Streams never share state, so results do
not depend on the order in which consumers run.
"""

from __future__ import annotations

import zlib

import numpy as np

RNG_VERSION = 1


def stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    key = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(RNG_VERSION, zlib.crc32(name.encode("utf-8")), int(index)),
    )
    return np.random.Generator(np.random.Philox(key))
