"""Command-line entry point: ``disagree run|eval|compare|selftest|oracle|acceptance``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .envs import REGISTRY, make_env
from .harness import ConfigError, RunError, Runner, RunLog, eval_policy, load_agent, load_config, preset_path
from .harness.compare import compare_runs, format_table
from .harness.config import env_option_value
from .harness.evaluate import save_agent
from .intrinsic.oracle import brute_force_disagreement, random_predictions
from .intrinsic import disagreement_reward
from .rng import stream

log = logging.getLogger("disagree")


def _config_path(name: str) -> Path:
    path = Path(name)
    return path if path.exists() else preset_path(name)


def cmd_run(args) -> int:
    cfg = load_config(_config_path(args.config), args.set)
    runner = Runner(cfg)
    def progress(row):
        if not args.quiet and "eval_return" in row:
            print(f"step {row['step']:>8}  eval return {row['eval_return']:.3f}  "
                  f"interaction {row['interaction_rate']:.3f}  intrinsic {row['intrinsic_mean']:.4g}")

    runner.run(progress)
    out = Path(args.out)
    runner.log.write(out)
    agent = Path(args.agent) if args.agent else out.with_name(out.name + ".agent")
    save_agent(agent, runner.policy, runner.encoder)
    print(f"wrote {out} ({len(runner.log)} rows) and {agent}")
    return 0


def _parse_options(env: str, items: list[str]) -> dict:
    opts = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"option {item!r} is not key=value")
        key, raw = item.split("=", 1)
        opts[key.strip()] = env_option_value(env, key.strip(), raw)
    return opts


def cmd_eval(args) -> int:
    policy, encoder = load_agent(args.checkpoint)
    desc = make_env(args.env, 0, **_parse_options(args.env, args.option)).descriptor
    if desc.d_obs != encoder.d_in:
        raise ConfigError(f"checkpoint expects observations of dim {encoder.d_in}, {args.env} has {desc.d_obs}")
    if desc.action_count != policy.action_count:
        raise ConfigError(f"checkpoint has {policy.action_count} actions, {args.env} has {desc.action_count}")
    s = eval_policy(policy, desc, args.episodes, args.seed, encoder, greedy=not args.sample)
    print(f"episodes {s.episodes}  steps {s.steps}  mean return {s.mean_return:.4f}  "
          f"goal rate {s.goal_rate:.4f}  interaction rate {s.interaction_rate:.4f}")
    return 0


def cmd_compare(args) -> int:
    logs = [RunLog.read(p) for p in args.csv]
    rows = compare_runs(logs, args.metric, args.window)
    print(format_table(rows, args.metric))
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    checks = run_selftest(args.seed)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def cmd_oracle(args) -> int:
    if args.k < 2 or args.dim < 1:
        raise ConfigError("need k >= 2 and dim >= 1")
    rng = stream(args.seed, "oracle-cli")
    worst = 0.0
    print(f"{'case':>4} {'brute force':>22} {'library':>22} {'abs diff':>10}")
    for i in range(args.cases):
        preds = random_predictions(rng, args.k, args.dim)
        brute = brute_force_disagreement(preds)
        lib = float(disagreement_reward(preds))
        worst = max(worst, abs(brute - lib) / max(1.0, abs(brute)))
        print(f"{i:>4} {brute!r:>22} {lib!r:>22} {abs(brute - lib):>10.2e}")
    print(f"max relative diff {worst:.3e}")
    return 0 if worst <= 1e-10 else 1


def cmd_acceptance(args) -> int:
    from .harness.acceptance import CRITERIA, run_criterion

    names = args.criteria or list(CRITERIA)
    results = []
    for name in names:
        res = run_criterion(name)
        print(res.line(), flush=True)
        results.append(res)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="disagree", description="Ensemble-disagreement exploration experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write its metric log")
    r.add_argument("--config", required=True, help="config file, or the name of a shipped preset")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    r.add_argument("--out", required=True, help="CSV log path")
    r.add_argument("--agent", help="checkpoint path for the trained agent (default: <out>.agent)")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(fn=cmd_run)

    e = sub.add_parser("eval", help="evaluate a saved agent greedily on fresh episodes")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--env", required=True, choices=sorted(REGISTRY))
    e.add_argument("--episodes", type=int, required=True)
    e.add_argument("--option", action="append", default=[], metavar="KEY=VALUE", help="env constructor option")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--sample", action="store_true", help="sample actions instead of argmax")
    e.set_defaults(fn=cmd_eval)

    c = sub.add_parser("compare", help="summarize a metric across run logs")
    c.add_argument("--metric", required=True)
    c.add_argument("--window", type=int, default=1)
    c.add_argument("csv", nargs="+")
    c.set_defaults(fn=cmd_compare)

    s = sub.add_parser("selftest", help="environment self-tests, gradient checks and reward-oracle checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_selftest)

    o = sub.add_parser("oracle", help="cross-check values")
    osub = o.add_subparsers(dest="oracle", required=True)
    v = osub.add_parser("variance", help="brute-force disagreement on randomized predictions")
    v.add_argument("k", type=int)
    v.add_argument("dim", type=int)
    v.add_argument("--cases", type=int, default=5)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(fn=cmd_oracle)

    a = sub.add_parser("acceptance", help="run acceptance experiments from the shipped presets")
    a.add_argument("criteria", nargs="*", metavar="A1..A8", help="criteria to run (default: all)")
    a.set_defaults(fn=cmd_acceptance)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, RunError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
