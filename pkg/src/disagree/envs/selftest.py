"""Environment self-checks, run by ``disagree selftest``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import stream
from . import make_env
from .noisy_pairs import N_CLASSES


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _stream_digest(name: str, seed: int, steps: int, **opts) -> list[tuple]:
    env = make_env(name, seed, **opts)
    actions = stream(seed, "selftest/actions")
    rows = []
    obs = env.reset()
    rows.append(obs.tobytes())
    for _ in range(steps):
        tr = env.step(int(actions.integers(0, env.action_count)))
        rows.append((tr.action, tr.next_obs.tobytes(), tr.done, tr.extrinsic, tuple(sorted(tr.info))))
        if tr.done:
            rows.append(env.reset().tobytes())
    return rows


def check_determinism(name: str, seed: int = 7, steps: int = 300) -> Check:
    same = _stream_digest(name, seed, steps) == _stream_digest(name, seed, steps)
    return Check(f"{name}: seeded determinism", same, f"{steps} steps compared")


def noisy_pairs_start_balance(n: int = 10_000, seed: int = 0) -> float:
    env = make_env("noisy-pairs", seed)
    ones = 0
    for _ in range(n):
        env.reset()
        ones += env.state_class
    return ones / n


def noisy_pairs_class1_tv(n: int = 10_000, seed: int = 0) -> float:
    """Total-variation distance of class-1 successors from uniform over 2..9."""
    env = make_env("noisy-pairs", seed)
    counts = np.zeros(N_CLASSES)
    seen = 0
    while seen < n:
        env.reset()
        if env.state_class != 1:
            continue
        env.step(0)
        counts[env.state_class] += 1
        seen += 1
    emp = counts / n
    target = np.zeros(N_CLASSES)
    target[2:] = 1.0 / (N_CLASSES - 2)
    return 0.5 * float(np.abs(emp - target).sum())


def touch_table_rates(n: int = 10_000, seed: int = 0, **opts) -> tuple[float, float]:
    """(empirical uniform-policy interaction rate, enumerated expectation)."""
    env = make_env("touch-table", seed, **opts)
    env.reset()
    expected = sum(env.touched(a) is not None for a in range(env.action_count)) / env.action_count
    actions = stream(seed, "selftest/touch-actions")
    hits = 0
    for _ in range(n):
        env.reset()
        tr = env.step(int(actions.integers(0, env.action_count)))
        hits += "touched-object" in tr.info
    return hits / n, expected


def run_all() -> list[Check]:
    checks = [check_determinism(name) for name in ("noisy-pairs", "noisy-tv-grid", "sticky-chain", "touch-table")]
    p1 = noisy_pairs_start_balance()
    checks.append(Check("noisy-pairs: start class balance", abs(p1 - 0.5) <= 0.05, f"P(class 1) = {p1:.4f}"))
    tv = noisy_pairs_class1_tv()
    checks.append(Check("noisy-pairs: class-1 successors uniform", tv <= 0.05, f"TV = {tv:.4f}"))
    rate, expected = touch_table_rates()
    rel = abs(rate - expected) / expected
    checks.append(Check("touch-table: random interaction rate", rel <= 0.2,
                        f"empirical {rate:.4f} vs enumerated {expected:.4f}"))
    dims = {
        "noisy-pairs": (16, 2, 1),
        "noisy-tv-grid": (72, 5, 128),
        "sticky-chain": (32, 2, 100),
        "touch-table": (512, 2048, 1),
    }
    for name, want in dims.items():
        d = make_env(name).descriptor
        got = (d.d_obs, d.action_count, d.horizon)
        checks.append(Check(f"{name}: default dims", got == want, f"{got}"))
    return checks
