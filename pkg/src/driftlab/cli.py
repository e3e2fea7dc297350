"""Command line entry points.

Subcommands mirror the pipeline stages (pretrain, profile, segment,
train, eval) plus the attribution oracle, ablation suites, and report
generation. Configuration comes from an INI file (--config) and every
registry key doubles as a CLI flag of the same name, applied on top of
the file; --set key=value does the same for scripting.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ablate, oracle, report
from .checkpoint import load_checkpoint
from .config import REGISTRY, load_config, output_root, resolve_run_dir, save_config
from .dynamics import DynamicsProfile
from .pipeline import (
    _S_PROFILE,
    run_pipeline,
    stage_eval,
    stage_pretrain,
    stage_profile,
    stage_segment,
)
from .rng import RandomStream

CONFIG_COMMANDS = ("pretrain", "profile", "segment", "train", "eval", "ablate")


def _add_config_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    group = parser.add_argument_group("config keys")
    for key, (section, _, default, help_text) in REGISTRY.items():
        group.add_argument(
            f"--{key}",
            dest=f"key_{key}",
            default=None,
            metavar="V",
            help=f"[{section}] {help_text} (default {default})",
        )


def _config_from_args(args) -> "RunConfig":
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in REGISTRY:
        value = getattr(args, f"key_{key}", None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def _out_dir(args, config) -> Path:
    out = resolve_run_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="chunk-level policy optimisation lab for flow-matching samplers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="flow-matching pretraining only")
    _add_config_arguments(p)
    p.add_argument("--out", default=None, help="run directory")

    p = sub.add_parser("profile", help="rollout dynamics profile of a checkpoint")
    _add_config_arguments(p)
    p.add_argument("--out", default=None, help="run directory")
    p.add_argument("--checkpoint", default=None, help="parameters to profile (default <out>/pretrained.ckpt)")

    p = sub.add_parser("segment", help="chunk plan from a saved profile")
    _add_config_arguments(p)
    p.add_argument("--out", default=None, help="run directory")
    p.add_argument("--profile", default=None, help="profile.json (default <out>/profile.json)")

    p = sub.add_parser("train", help="full pipeline: pretrain, profile, segment, train, eval")
    _add_config_arguments(p)
    p.add_argument("--out", default=None, help="run directory")
    p.add_argument("--seed", type=int, default=None, help="override the first config seed")
    p.add_argument("--no-plots", action="store_true", help="skip figure generation")

    p = sub.add_parser("eval", help="deterministic evaluation of a trained checkpoint")
    _add_config_arguments(p)
    p.add_argument("--out", default=None, help="run directory")
    p.add_argument("--checkpoint", default=None, help="trained parameters (default <out>/policy.ckpt)")
    p.add_argument("--reference", default=None, help="reference parameters (default <out>/pretrained.ckpt)")

    p = sub.add_parser("oracle", help="exact step-versus-chunk attribution tables")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--t-max", type=int, default=12, help="largest trajectory length")

    p = sub.add_parser("ablate", help="run an ablation suite")
    _add_config_arguments(p)
    p.add_argument("--suite", required=True, choices=sorted(ablate.SUITES))
    p.add_argument("--out", default=None, help="suite directory")

    p = sub.add_parser("report", help="markdown report over finished runs")
    p.add_argument("runs", nargs="*", help="run directories")
    p.add_argument("--out", default=None, help="report directory")
    return parser


def _cmd_pretrain(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, config)
    save_config(config, out / "config.ini")
    root = RandomStream(config.seeds[0])
    stage_pretrain(config, root, out)
    print(out / "pretrained.ckpt")
    return 0


def _cmd_profile(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, config)
    checkpoint = Path(args.checkpoint) if args.checkpoint else out / "pretrained.ckpt"
    params = load_checkpoint(checkpoint)
    root = RandomStream(config.seeds[0])
    stage_profile(config, params, root.spawn(_S_PROFILE), out)
    print(out / "profile.json")
    return 0


def _cmd_segment(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, config)
    profile_path = Path(args.profile) if args.profile else out / "profile.json"
    blob = json.loads(profile_path.read_text())["pooled"]
    pooled = DynamicsProfile(
        values=blob["values"],
        n_trajectories=blob["n_trajectories"],
        condition=blob["condition"],
    )
    plan = stage_segment(config, pooled, out)
    print(out / "plan.json")
    print(f"sizes: {list(plan.sizes)}")
    return 0


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    run_dir = run_pipeline(
        config,
        run_dir=args.out,
        seed=args.seed,
        make_plots=not args.no_plots,
    )
    print(run_dir)
    return 0


def _cmd_eval(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args, config)
    trained = load_checkpoint(args.checkpoint if args.checkpoint else out / "policy.ckpt")
    reference = load_checkpoint(args.reference if args.reference else out / "pretrained.ckpt")
    root = RandomStream(config.seeds[0])
    result = stage_eval(config, trained, reference, root, out)
    print(out / "eval.json")
    overall = result["overall"]
    print(
        "overall reward: trained {trained_ode:.4f} reference {reference_ode:.4f} "
        "hybrid {hybrid:.4f}".format(**overall)
    )
    return 0


def _cmd_oracle(args) -> int:
    out = Path(args.out) if args.out else output_root() / "oracle"
    out.mkdir(parents=True, exist_ok=True)
    rows = oracle.win_region_rows(args.t_max)
    header = "T,m,dist_sq_grpo,dist_sq_chunk,dist_sq_chunk_float,chunk_wins_quadratic,chunk_wins_distance"
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                [
                    str(row["T"]),
                    str(row["m"]),
                    row["dist_sq_grpo"],
                    row["dist_sq_chunk"],
                    format(row["dist_sq_chunk_float"], ".12g"),
                    str(int(row["chunk_wins_quadratic"])),
                    str(int(row["chunk_wins_distance"])),
                ]
            )
        )
    (out / "win_region.csv").write_text("\n".join(lines) + "\n")
    report.plot_win_region(out / "win_region.svg", t_max=args.t_max)
    disagreements = [
        (row["T"], row["m"])
        for row in rows
        if row["chunk_wins_quadratic"] != row["chunk_wins_distance"]
    ]
    print(out / "win_region.csv")
    print(f"rows: {len(rows)}; threshold/distance disagreements: {len(disagreements)}")
    if disagreements:
        print("disagreeing (T, m): " + ", ".join(str(p) for p in disagreements))
    return 0


def _cmd_ablate(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out) if args.out else output_root() / f"ablate-{args.suite}"
    out.mkdir(parents=True, exist_ok=True)
    ablate.run_suite(args.suite, config, out)
    print(out / "report.md")
    return 0


def _cmd_report(args) -> int:
    out = Path(args.out) if args.out else output_root() / "report"
    path = report.emit_report(args.runs, out)
    print(path)
    return 0


_HANDLERS = {
    "pretrain": _cmd_pretrain,
    "profile": _cmd_profile,
    "segment": _cmd_segment,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "oracle": _cmd_oracle,
    "ablate": _cmd_ablate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _HANDLERS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
