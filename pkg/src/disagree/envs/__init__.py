"""Seeded toy environments with controlled stochasticity."""

from __future__ import annotations

from .base import Env, EnvDescriptor, EnvError, Transition
from .noisy_pairs import NoisyPairs
from .noisy_tv import NoisyTvGrid
from .sticky_chain import StickyChain
from .touch_table import TouchTable

REGISTRY: dict[str, type[Env]] = {
    "noisy-pairs": NoisyPairs,
    "noisy-tv-grid": NoisyTvGrid,
    "sticky-chain": StickyChain,
    "touch-table": TouchTable,
}


def make_env(name: str, seed: int = 0, **options) -> Env:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    return cls(seed=seed, **options)


def from_descriptor(desc: EnvDescriptor) -> Env:
    env = make_env(desc.name, desc.seed, **desc.options)
    got = env.descriptor
    if (got.d_obs, got.action_count) != (desc.d_obs, desc.action_count):
        raise ValueError(f"descriptor dims {desc.d_obs}/{desc.action_count} do not match "
                         f"{desc.name} ({got.d_obs}/{got.action_count})")
    return env


__all__ = [
    "Env", "EnvDescriptor", "EnvError", "NoisyPairs", "NoisyTvGrid", "REGISTRY",
    "StickyChain", "TouchTable", "Transition", "from_descriptor", "make_env",
]
