"""Command-line interface.

Subcommands: gen-dataset, run, optima, inspect. Exit codes: 0 success,
1 usage, 2 I/O, 3 validation; human-readable messages go to stderr.
Log verbosity comes from the DCB_ARENA_LOG environment variable
(error | warn | info | debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import dataset as ds
from .agents import Hyperparameters
from .deployment import load_deployment
from .errors import NotFoundError, PersistenceError, ValidationError
from .harness import (
    EnvSpec,
    RunConfig,
    aggregate,
    run_sweep,
    write_runlog_csv,
    write_summary_csv,
)
from .spectrum import Action

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VALIDATION = 3

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract says 1
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _configure_logging() -> None:
    level_name = os.environ.get("DCB_ARENA_LOG", "warn").lower()
    level = _LOG_LEVELS.get(level_name)
    if level is None:
        raise ValidationError(
            f"DCB_ARENA_LOG must be one of {sorted(_LOG_LEVELS)}, got {level_name!r}"
        )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> _Parser:
    parser = _Parser(prog="dcb-arena", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = sub.add_parser("gen-dataset", help="simulate every configuration into a CSV")
    gen.add_argument("--deployment", required=True, help="deployment TOML file")
    gen.add_argument("--out", required=True, help="output dataset CSV")
    gen.add_argument("--duration", type=float, default=5.0, help="seconds per record")
    gen.add_argument("--reps", type=int, default=1, help="simulations averaged per record")
    gen.add_argument("--threads", type=int, default=1, help="worker processes")
    gen.add_argument("--seed", type=int, default=0, help="base seed")

    run = sub.add_parser("run", help="run a learning sweep and write CSV logs")
    run.add_argument("--deployment", required=True)
    run.add_argument("--dataset", help="dataset CSV to replay")
    run.add_argument("--live", action="store_true", help="simulate every iteration")
    run.add_argument("--algo", required=True, help="selector, or comma list (one per bss)")
    run.add_argument("--iters", type=int, default=200)
    run.add_argument("--seeds", type=int, default=100)
    run.add_argument("--seed", type=int, default=0, help="base seed")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--duration", type=float, default=5.0, help="live-mode seconds per iteration")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--worst-mode", choices=["min-then-avg", "avg-then-min"], default="min-then-avg")
    run.add_argument("--epsilon0", type=float, default=1.0)
    run.add_argument("--alpha", type=float, default=0.8)
    run.add_argument("--gamma", type=float, default=0.2)
    run.add_argument("--sat-threshold", type=float, default=0.99)
    run.add_argument("--static-action", help="fixed 'primary,max_bw' for static/heuristic")

    opt = sub.add_parser("optima", help="scan a dataset for all-satisfied configurations")
    opt.add_argument("--dataset", required=True)
    opt.add_argument("--deployment", required=True)
    opt.add_argument("--threshold", type=float, default=0.99)

    ins = sub.add_parser("inspect", help="decode one dataset record")
    ins.add_argument("--dataset", required=True)
    ins.add_argument("--config-id", type=int, required=True)
    return parser


def _parse_static_action(text: str | None) -> Action | None:
    if text is None:
        return None
    try:
        primary, max_bw = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"--static-action expects 'primary,max_bw', got {text!r}") from exc
    return Action(primary, max_bw)


def _cmd_gen_dataset(args) -> int:
    deployment, mac = load_deployment(args.deployment)
    result = ds.generate(
        deployment,
        args.duration,
        mac,
        reps=args.reps,
        base_seed=args.seed,
        parallelism=args.threads,
        out_path=args.out,
    )
    print(f"wrote {result.n_configs} records to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    if bool(args.dataset) == bool(args.live):
        raise _UsageError("run: exactly one of --dataset or --live is required")
    deployment, mac = load_deployment(args.deployment)
    algos = tuple(args.algo.split(","))
    if len(algos) == 1:
        algos = algos * deployment.n_bss
    hyper = Hyperparameters(
        epsilon0=args.epsilon0,
        alpha=args.alpha,
        gamma=args.gamma,
        sat_threshold=args.sat_threshold,
        static_action=_parse_static_action(args.static_action),
    )
    config = RunConfig(
        algorithms=algos,
        iterations=args.iters,
        iteration_seconds=args.duration,
        seeds=args.seeds,
        base_seed=args.seed,
        threads=args.threads,
        worst_mode=args.worst_mode,
        hyper=hyper,
    )
    if args.dataset:
        data = ds.load(args.dataset)
        ds.validate_against(data, deployment, mac)
        env_spec = EnvSpec(deployment, mac, dataset=data)
    else:
        env_spec = EnvSpec(
            deployment,
            mac,
            dataset=None,
            iteration_seconds=args.duration,
            record_occupancy=any(name == "heuristic" for name in algos),
        )
    run_log = run_sweep(env_spec, config)
    summary = aggregate(run_log, config.worst_mode, hyper.sat_threshold)

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PersistenceError(f"cannot create output directory {out_dir}: {exc}", out_dir) from exc
    write_runlog_csv(out_dir / "runlog.csv", run_log)
    write_summary_csv(out_dir / "summary.csv", summary)

    reached = [t for t in summary.tau if t is not None]
    tau_text = (
        f"tau median {sorted(reached)[len(reached) // 2]} over {len(reached)}/{len(summary.tau)} seeds"
        if reached
        else "tau never reached"
    )
    print(
        f"final mean G/T {summary.final_mean:.4f}, worst {summary.final_worst:.4f} "
        f"({summary.worst_mode}); {tau_text}; logs in {out_dir}"
    )
    return EXIT_OK


def _cmd_optima(args) -> int:
    deployment, mac = load_deployment(args.deployment)
    data = ds.load(args.dataset)
    ds.validate_against(data, deployment, mac)
    result = ds.find_optima(data, deployment.loads_mbps, args.threshold)
    print(
        f"max-min sigma {result.best_min_sigma:.6f} at config_id {result.best_id}; "
        f"{len(result.satisfied)} configuration(s) at threshold {args.threshold}"
    )
    for cid, min_sigma in result.satisfied:
        actions = ds.config_from_id(cid, data.n_channels, data.n_bss)
        desc = " ".join(f"({a.primary},{a.max_bandwidth})" for a in actions)
        print(f"config_id {cid} min_sigma {min_sigma:.6f} actions {desc}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    data = ds.load(args.dataset)
    if not 0 <= args.config_id < data.n_configs:
        raise ValidationError(
            f"config id {args.config_id} out of range [0, {data.n_configs})"
        )
    throughput = ds.lookup_id(data, args.config_id)
    actions = ds.config_from_id(args.config_id, data.n_channels, data.n_bss)
    print(f"config_id {args.config_id} of {data.n_configs}")
    for w, (action, thr) in enumerate(zip(actions, throughput)):
        print(
            f"bss {w}: primary {action.primary}, max_bw {action.max_bandwidth}, "
            f"throughput {thr:.6f} Mbps"
        )
    return EXIT_OK


_COMMANDS = {
    "gen-dataset": _cmd_gen_dataset,
    "run": _cmd_run,
    "optima": _cmd_optima,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        _configure_logging()
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage())
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PersistenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, NotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def run_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run_main()
