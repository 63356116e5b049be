"""Command-line entry point: ``parasac train|eval|verify|plot``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .errors import CheckpointError, ConfigError, DivergenceError
from .runner.config import load_config
from .runner.evaluate import evaluate
from .runner.plotting import plot_metrics, read_metrics
from .runner.trainer import Trainer, train
from .runner.verify import SUITES


def _summary(records) -> str:
    if not records:
        return "no iterations run"
    last = records[-1]
    finite = [r.mean_episode_return for r in records if not math.isnan(r.mean_episode_return)]
    rows = [("iterations", last.iteration), ("env steps", last.env_steps),
            ("final mean episode return", last.mean_episode_return),
            ("best mean episode return", max(finite) if finite else math.nan),
            ("final critic loss", last.critic_loss), ("final alpha", last.alpha),
            ("final entropy", last.entropy), ("wall-clock seconds", last.wall_clock_seconds)]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:.6g}" if isinstance(v, float) else f"{k:<{width}}  {v}"
                     for k, v in rows)


def cmd_train(args) -> int:
    overrides = {"seed": args.seed, "metrics path": args.metrics,
                 "checkpoint path": args.checkpoint, "max iterations": args.iterations}
    cfg = load_config(args.config, args.profile,
                      {k: v for k, v in overrides.items() if v is not None})

    def progress(trainer, rec):
        if not args.quiet:
            print(rec.to_json(), flush=True)

    trainer, records = train(cfg, resume=args.resume, callback=progress)
    print(_summary(records))
    return 0


def cmd_eval(args) -> int:
    trainer = Trainer.load(args.checkpoint)
    hold = trainer.config.evaluation.get("hold window")
    report = evaluate(trainer.agent, trainer.normalizer, trainer.env_spec, args.episodes,
                      seed=args.seed, hold_window=hold)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_verify(args) -> int:
    report = SUITES[args.suite]()
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else 1


def cmd_plot(args) -> int:
    plot_metrics(read_metrics(args.metrics), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parasac", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from a run config")
    t.add_argument("--config", required=True, help="run config file or bundled run name")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--profile", choices=["desk", "paper"], default=None)
    t.add_argument("--resume", default=None, help="checkpoint to resume from")
    t.add_argument("--metrics", default=None, help="JSON-lines metrics output")
    t.add_argument("--checkpoint", default=None, help="checkpoint output file")
    t.add_argument("--iterations", type=int, default=None, help="override max iterations")
    t.add_argument("--quiet", action="store_true", help="only print the final summary")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="deterministic evaluation of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=16)
    e.add_argument("--seed", type=int, default=10_000)
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=sorted(SUITES))
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="plot reward curves from a metrics file")
    pl.add_argument("--metrics", required=True)
    pl.add_argument("--out", required=True, help="output SVG file")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, DivergenceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
