"""Run configuration: flat key-value files with sections.

Every key lives in a registry with its section, type, default, and
help text. The same registry drives INI parsing, CLI flag generation,
and config snapshots, so a key is overridable by a flag of the same
name everywhere. Snapshots are written with fixed ordering to keep
them byte-stable.

The output root comes from one environment variable,
DRIFTLAB_OUTPUT_ROOT (default ./runs); everything else is config.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .data import DataSpec, ring_mixture, two_moons
from .flow import PretrainConfig, TimeSchedule, make_schedule
from .grpo import ChunkPlan, GrpoConfig
from .rewards import RewardSpec

OUTPUT_ROOT_VAR = "DRIFTLAB_OUTPUT_ROOT"

VARIANTS = ("step", "chunk", "sequence")
DATA_KINDS = ("ring", "moons")


def _parse_bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_ints(s: str) -> tuple:
    return tuple(int(p) for p in s.split(",") if p.strip() != "")


def _parse_floats(s: str) -> tuple:
    return tuple(float(p) for p in s.split(",") if p.strip() != "")


# key -> (section, parser, default-as-string, help)
REGISTRY = {
    "data_kind": ("data", str, "ring", "dataset family: ring | moons"),
    "n_modes": ("data", int, "8", "mixture modes on the ring"),
    "radius": ("data", float, "4.0", "ring radius"),
    "mode_sigma": ("data", float, "0.3", "per-mode standard deviation"),
    "modes_per_condition": ("data", int, "2", "ring modes grouped per condition"),
    "moons_noise": ("data", float, "0.15", "two-moons noise level"),
    "steps": ("schedule", int, "17", "sampling steps T"),
    "shift": ("schedule", float, "3.0", "time-schedule shift"),
    "pretrain_steps": ("pretrain", int, "1500", "flow-matching steps"),
    "pretrain_batch": ("pretrain", int, "256", "flow-matching batch size"),
    "pretrain_lr": ("pretrain", float, "1e-3", "flow-matching learning rate"),
    "pretrain_decay": ("pretrain", float, "1e-4", "flow-matching weight decay"),
    "hidden": ("pretrain", _parse_ints, "64,64,64", "hidden layer sizes"),
    "time_freqs": ("pretrain", int, "8", "sinusoidal time feature frequencies"),
    "clip_range": ("grpo", float, "5e-5", "importance-ratio clip range"),
    "kl_beta": ("grpo", float, "0.0", "KL penalty weight"),
    "group_size": ("grpo", int, "12", "trajectories per group"),
    "fraction": ("grpo", float, "0.5", "fraction of chunks trained per update"),
    "learning_rate": ("grpo", float, "1e-3", "policy learning rate"),
    "weight_decay": ("grpo", float, "1e-4", "policy weight decay"),
    "max_grad_norm": ("grpo", float, "0.01", "global gradient norm clip"),
    "eta": ("grpo", float, "0.7", "rollout noise level"),
    "grad_accum": ("grpo", int, "2", "groups accumulated per update"),
    "inner_steps": ("grpo", int, "2", "optimiser steps per rollout batch"),
    "variant": ("train", str, "chunk", "objective granularity: step | chunk | sequence"),
    "plan_source": ("train", str, "dynamics", "chunk plan: dynamics | sizes:a,b,... | file:path"),
    "chunk_count": ("train", int, "4", "chunks for dynamics segmentation"),
    "weighted": ("train", _parse_bool, "false", "profile-weighted chunk sampling"),
    "updates": ("train", int, "150", "optimiser updates"),
    "seeds": ("train", _parse_ints, "0", "experiment seeds"),
    "profile_rollouts": ("train", int, "64", "rollouts per condition for profiling"),
    "reward_kind": ("rewards", str, "composite", "mode-preference | fidelity | composite"),
    "tau": ("rewards", float, "1.0", "mode-preference temperature"),
    "reward_weights": ("rewards", _parse_floats, "0.7,0.3", "composite (preference, fidelity) weights"),
    "eval_samples": ("eval", int, "256", "evaluation samples per condition"),
    "hybrid_split": ("eval", float, "0.6", "fraction of steps driven by the trained policy"),
    "run_name": ("output", str, "run", "run directory name under the output root"),
}

SECTIONS = ("data", "schedule", "pretrain", "grpo", "train", "rewards", "eval", "output")


@dataclass(frozen=True)
class RunConfig:
    """Typed view of the full key registry."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        known = dict(self.values)
        for key, (_, parse, default, _) in REGISTRY.items():
            if key not in known:
                known[key] = parse(default)
        unknown = set(known) - set(REGISTRY)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if known["variant"] not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if known["data_kind"] not in DATA_KINDS:
            raise ValueError(f"data_kind must be one of {DATA_KINDS}")
        if not known["seeds"]:
            raise ValueError("need at least one seed")
        source = known["plan_source"]
        if source != "dynamics" and not source.startswith(("sizes:", "file:")):
            raise ValueError("plan_source must be dynamics, sizes:..., or file:...")
        if source.startswith("file:") and not Path(source[5:]).exists():
            raise ValueError(f"plan file not found: {source[5:]}")
        object.__setattr__(self, "values", known)

    def __getattr__(self, key):
        values = object.__getattribute__(self, "values")
        if key in values:
            return values[key]
        raise AttributeError(key)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """Apply raw string overrides (CLI flags) on top of this config."""
        merged = dict(self.values)
        for key, raw in overrides.items():
            if key not in REGISTRY:
                raise ValueError(f"unknown config key: {key}")
            merged[key] = REGISTRY[key][1](raw) if isinstance(raw, str) else raw
        return RunConfig(values=merged)

    def dataset(self) -> DataSpec:
        if self.data_kind == "ring":
            return ring_mixture(
                n_modes=self.n_modes,
                radius=self.radius,
                sigma=self.mode_sigma,
                modes_per_condition=self.modes_per_condition,
            )
        return two_moons(noise=self.moons_noise)

    def schedule(self) -> TimeSchedule:
        return make_schedule(self.steps, self.shift)

    def grpo(self) -> GrpoConfig:
        return GrpoConfig(
            clip_range=self.clip_range,
            kl_beta=self.kl_beta,
            group_size=self.group_size,
            fraction=self.fraction,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            max_grad_norm=self.max_grad_norm,
            eta=self.eta,
            grad_accum=self.grad_accum,
            inner_steps=self.inner_steps,
        )

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(
            steps=self.pretrain_steps,
            batch_size=self.pretrain_batch,
            learning_rate=self.pretrain_lr,
            weight_decay=self.pretrain_decay,
            hidden=self.hidden,
            time_freqs=self.time_freqs,
        )

    def reward_spec(self, data: DataSpec) -> RewardSpec:
        return RewardSpec(
            data=data, kind=self.reward_kind, tau=self.tau, weights=self.reward_weights
        )

    def fixed_plan(self):
        """The plan when plan_source is explicit; None for dynamics."""
        source = self.plan_source
        if source == "dynamics":
            return None
        if source.startswith("sizes:"):
            return ChunkPlan.from_sizes(_parse_ints(source[6:]))
        import json

        blob = json.loads(Path(source[5:]).read_text())
        return ChunkPlan.from_sizes(tuple(blob["sizes"]), tuple(blob.get("weights")) if blob.get("weights") else None)


def load_config(path=None, overrides: dict = None) -> RunConfig:
    """Read an INI file (optional) and apply overrides (optional)."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in REGISTRY:
                    raise ValueError(f"unknown config key {key!r} in {path}")
                if REGISTRY[key][0] != section:
                    raise ValueError(f"key {key!r} belongs in section [{REGISTRY[key][0]}]")
                values[key] = REGISTRY[key][1](raw)
    config = RunConfig(values=values)
    if overrides:
        config = config.with_overrides(overrides)
    return config


def format_value(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(format_value(key, v) for v in value)
    if isinstance(value, float):
        # repr is the shortest string that parses back to the same float
        return repr(value)
    return str(value)


def save_config(config: RunConfig, path) -> Path:
    """Byte-stable snapshot: fixed section and key order."""
    path = Path(path)
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for key, (sec, _, _, _) in REGISTRY.items():
            if sec == section:
                lines.append(f"{key} = {format_value(key, config.values[key])}")
        lines.append("")
    path.write_text("\n".join(lines))
    return path


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_VAR, "runs"))


def resolve_run_dir(config: RunConfig, explicit=None) -> Path:
    if explicit is not None:
        return Path(explicit)
    return output_root() / config.run_name
