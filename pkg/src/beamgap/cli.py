"""Command-line entry point.

Subcommands: world, train, experiment, validate, report. All randomness
flows from --seed (or global_seed in the config file); a seed-audit line
goes to stderr on every run. Logs go to stderr, data to files under
--out. Exit codes: 0 success, 1 check failure, 2 data/config error,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import (
    channel_kwargs,
    experiment_spec,
    experiment_seeds,
    load_config,
    mobility_config,
    model_spec,
    radio_config,
    train_config,
    world_config,
)
from .errors import BeamgapError, ConfigError
from .experiments import collect_dataset, emit_report, run_experiment, setup_profile
from .predictor import save_model, train
from .scenario import build_world, synth_mobility
from .seeding import derive_seed

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_DATA_ERROR = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _seed_audit(cfg: dict) -> str:
    seeds = experiment_seeds(cfg)
    parts = " ".join(f"{k}={v}" for k, v in seeds.to_dict().items())
    return f"seed-audit: global={cfg['global_seed']} {parts}"


def build_parser() -> _Parser:
    parser = _Parser(prog="beamgap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"beamgap {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override one config leaf (repeatable)",
    )
    common.add_argument("--seed", type=int, help="global seed override")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker thread bound")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("world", parents=[common], help="build and serialize the world")
    sub.add_parser("train", parents=[common], help="collect data and train the predictor")
    p_exp = sub.add_parser("experiment", parents=[common], help="run a heterogeneity protocol")
    p_exp.add_argument("--protocol", choices=("antenna", "codebook", "location"))
    p_exp.add_argument(
        "--dry-run", action="store_true", help="print the resolved spec and exit"
    )
    p_val = sub.add_parser("validate", parents=[common], help="run the fast invariant suite")
    p_val.add_argument("--model", help="also check that this model file loads")
    p_rep = sub.add_parser("report", parents=[common], help="render figures for a report dir")
    p_rep.add_argument("--in", dest="in_dir", required=True, help="emitted report directory")
    p_rep.set_defaults(out=None)  # default: render next to the report files
    return parser


def cmd_world(cfg: dict, out_dir: Path) -> int:
    world = build_world(experiment_seeds(cfg).world, world_config(cfg))
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "world.json"
    path.write_text(world.to_json() + "\n", encoding="utf-8")
    _log(_seed_audit(cfg))
    _log(f"world: {len(world.scatterers)} scatterers, {len(world.blockers)} blockers -> {path}")
    return EXIT_OK


def cmd_train(cfg: dict, out_dir: Path) -> int:
    seeds = experiment_seeds(cfg)
    world = build_world(seeds.world, world_config(cfg))
    mob = mobility_config(cfg)
    trace = synth_mobility(world, mob.n_vehicles, mob.duration_s, seeds.mobility, config=mob)
    spec = experiment_spec(cfg)
    profile = setup_profile(spec.train_setup, spec.world.carrier_hz)
    codebook = spec.train_setup.codebook.build(spec.train_setup.ue_rows, spec.train_setup.ue_cols)
    _log(_seed_audit(cfg))
    dataset = collect_dataset(
        world, trace, profile, codebook,
        cfg["experiment"]["n_train_snapshots"], seeds.train_sample,
        radio=radio_config(cfg), quadrant_filter=spec.train_setup.quadrants,
        channel_kwargs=channel_kwargs(cfg),
    )
    _log(f"train: {len(dataset)} samples from {cfg['experiment']['n_train_snapshots']} snapshots")
    model, tlog = train(
        dataset, model_spec(cfg, seed=seeds.model),
        train_config(cfg, seed=derive_seed(seeds.model, "shuffle")),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "model.bin"
    save_model(model, model_path)
    log_path = out_dir / "training_log.csv"
    tlog.write_csv(log_path)
    _log(
        f"train: best val MSE {tlog.best_val_mse:.6f} at epoch {tlog.best_epoch}; "
        f"wrote {model_path} and {log_path}"
    )
    return EXIT_OK


def cmd_experiment(cfg: dict, out_dir: Path, protocol, dry_run: bool, threads: int) -> int:
    spec = experiment_spec(cfg, protocol)
    if dry_run:
        print(json.dumps(spec.to_dict(), sort_keys=True, indent=2))
        return EXIT_OK
    _log(_seed_audit(cfg))
    _log(f"experiment: protocol={spec.protocol} config_sha256={spec.config_hash()[:12]}")
    report = run_experiment(spec, threads=threads)
    written = emit_report(report, out_dir)
    from .plots import render_report_dir

    figures = render_report_dir(out_dir)
    for name, rep in sorted(report.setups.items()):
        line = ", ".join(
            f"{s.method} mean {s.mean_drop_pct:.2f}% p90 {s.p90_drop_pct:.2f}%"
            for s in rep.summaries
        )
        _log(f"experiment[{name}]: {line} (outages {len(rep.outage_ids)})")
    _log(f"experiment: wrote {len(written)} files + {len(figures)} figures to {out_dir}")
    return EXIT_OK


def cmd_validate(cfg: dict, model_path) -> int:
    from .validate import run_all

    _log(_seed_audit(cfg))
    failures = 0
    for name, ok, detail in run_all(model_path):
        status = "PASS" if ok else "FAIL"
        print(f"{status} {name}: {detail}")
        failures += 0 if ok else 1
    return EXIT_OK if failures == 0 else EXIT_CHECK_FAILED


def cmd_report(cfg: dict, in_dir: str, out_dir) -> int:
    from .plots import render_report_dir

    _log(_seed_audit(cfg))
    figures = render_report_dir(in_dir, out_dir)  # None renders in place
    for fig in figures:
        _log(f"report: wrote {fig}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set, args.seed)
        out_dir = Path(args.out) if args.out is not None else None
        if args.command == "world":
            return cmd_world(cfg, out_dir)
        if args.command == "train":
            return cmd_train(cfg, out_dir)
        if args.command == "experiment":
            return cmd_experiment(cfg, out_dir, args.protocol, args.dry_run, args.threads)
        if args.command == "validate":
            return cmd_validate(cfg, args.model)
        if args.command == "report":
            return cmd_report(cfg, args.in_dir, out_dir)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_DATA_ERROR
    except BeamgapError as exc:
        _log(f"error: {exc}")
        return EXIT_DATA_ERROR
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
