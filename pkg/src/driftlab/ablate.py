"""Ablation suites: grids of training runs sharing pretrained models.

Each suite prepares one pretrained model and dynamics profile per seed,
then trains every arm from that shared starting point in its own
subdirectory (seed-<s>/<arm>/). Arms re-derive their random streams
from the seed with the same child ids the pipeline uses, so an arm
whose settings match a full pipeline run reproduces it exactly.

Suites write results.csv (one row per arm and seed) and report.md (arms
ranked by mean deterministic-eval reward across seeds).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import RunConfig, save_config
from .pipeline import (
    _S_PROFILE,
    stage_eval,
    stage_profile,
    stage_pretrain,
    stage_segment,
    stage_train,
)
from .rng import RandomStream

RESULTS_HEADER = "suite,arm,seed,final_rollout_reward,trained_ode,reference_ode,hybrid"


def _prepare_seed(config: RunConfig, seed: int, seed_dir: Path):
    """Pretrain and profile once; every arm of this seed reuses both."""
    seed_dir.mkdir(parents=True, exist_ok=True)
    root = RandomStream(seed)
    pretrained = stage_pretrain(config, root, seed_dir)
    _, pooled = stage_profile(config, pretrained, root.spawn(_S_PROFILE), seed_dir)
    return pretrained, pooled


def _run_arm(config: RunConfig, pretrained, pooled, seed: int, arm_dir: Path, selected=None) -> dict:
    arm_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, arm_dir / "config.ini")
    root = RandomStream(seed)
    plan = stage_segment(config, pooled, arm_dir)
    trained, rows = stage_train(config, pretrained, plan, root, arm_dir, selected=selected)
    evaluation = stage_eval(config, trained, pretrained, root, arm_dir)
    return {
        "final_rollout_reward": rows[-1].reward_mean if rows else float("nan"),
        "trained_ode": evaluation["overall"]["trained_ode"],
        "reference_ode": evaluation["overall"]["reference_ode"],
        "hybrid": evaluation["overall"]["hybrid"],
        "plan_sizes": list(plan.sizes),
    }


def chunk_setting_arms(n_transitions: int) -> dict:
    """Chunk-granularity grid: equal-size plans plus the dynamics plan.

    Only equal sizes that divide the transition count appear; for 16
    transitions this is the [2]*8, [4]*4, [8,8], [16] grid.
    """
    arms = {}
    for size, name in ((2, "equal-2"), (4, "equal-4")):
        if n_transitions % size == 0 and n_transitions // size >= 2:
            arms[name] = "sizes:" + ",".join([str(size)] * (n_transitions // size))
    if n_transitions % 2 == 0:
        half = n_transitions // 2
        arms["halves"] = f"sizes:{half},{half}"
    arms["single"] = f"sizes:{n_transitions}"
    arms["dynamics"] = "dynamics"
    return arms


def chunk_settings_suite(config: RunConfig, out_dir, seeds=None) -> Path:
    """How much does the chunking layout matter at fixed budget?"""
    out_dir = Path(out_dir)
    seeds = tuple(seeds) if seeds is not None else config.seeds
    n_transitions = config.schedule().steps - 1
    arms = chunk_setting_arms(n_transitions)
    results = []
    for seed in seeds:
        seed_dir = out_dir / f"seed-{seed}"
        pretrained, pooled = _prepare_seed(config, seed, seed_dir)
        for name, source in arms.items():
            arm_config = config.with_overrides(
                {"plan_source": source, "variant": "chunk"}
            )
            row = _run_arm(arm_config, pretrained, pooled, seed, seed_dir / name)
            results.append({"suite": "chunk-settings", "arm": name, "seed": seed, **row})
    return _write_suite(out_dir, "chunk-settings", results)


def specific_chunks_suite(config: RunConfig, out_dir, seeds=None) -> Path:
    """Train each chunk of the plan alone to localise the useful signal."""
    out_dir = Path(out_dir)
    seeds = tuple(seeds) if seeds is not None else config.seeds
    results = []
    for seed in seeds:
        seed_dir = out_dir / f"seed-{seed}"
        pretrained, pooled = _prepare_seed(config, seed, seed_dir)
        plan = config.with_overrides({"variant": "chunk"}).fixed_plan()
        if plan is None:
            from .dynamics import segment_chunks

            plan = segment_chunks(pooled, config.chunk_count)
        for j in range(plan.n_chunks):
            arm_config = config.with_overrides({"variant": "chunk"})
            row = _run_arm(
                arm_config, pretrained, pooled, seed, seed_dir / f"chunk-{j}",
                selected=(j,),
            )
            results.append({"suite": "specific-chunks", "arm": f"chunk-{j}", "seed": seed, **row})
    return _write_suite(out_dir, "specific-chunks", results)


def weighted_sampling_suite(config: RunConfig, out_dir, seeds=None) -> Path:
    """Profile-weighted versus uniform chunk selection, same seeds."""
    out_dir = Path(out_dir)
    seeds = tuple(seeds) if seeds is not None else config.seeds
    results = []
    for seed in seeds:
        seed_dir = out_dir / f"seed-{seed}"
        pretrained, pooled = _prepare_seed(config, seed, seed_dir)
        for name, flag in (("uniform", "false"), ("weighted", "true")):
            arm_config = config.with_overrides({"weighted": flag, "variant": "chunk"})
            row = _run_arm(arm_config, pretrained, pooled, seed, seed_dir / name)
            results.append({"suite": "weighted-sampling", "arm": name, "seed": seed, **row})
    return _write_suite(out_dir, "weighted-sampling", results)


SUITES = {
    "chunk-settings": chunk_settings_suite,
    "specific-chunks": specific_chunks_suite,
    "weighted-sampling": weighted_sampling_suite,
}


def run_suite(name: str, config: RunConfig, out_dir, seeds=None) -> Path:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return SUITES[name](config, out_dir, seeds=seeds)


def _write_suite(out_dir: Path, suite: str, results: list) -> Path:
    lines = [RESULTS_HEADER]
    for row in results:
        lines.append(
            ",".join(
                [
                    row["suite"],
                    row["arm"],
                    str(row["seed"]),
                    format(row["final_rollout_reward"], ".12g"),
                    format(row["trained_ode"], ".12g"),
                    format(row["reference_ode"], ".12g"),
                    format(row["hybrid"], ".12g"),
                ]
            )
        )
    (out_dir / "results.csv").write_text("\n".join(lines) + "\n")

    arms = sorted({row["arm"] for row in results})
    summary = []
    for arm in arms:
        rows = [r for r in results if r["arm"] == arm]
        summary.append(
            {
                "arm": arm,
                "mean_trained_ode": float(np.mean([r["trained_ode"] for r in rows])),
                "mean_final_reward": float(np.mean([r["final_rollout_reward"] for r in rows])),
                "seeds": len(rows),
            }
        )
    summary.sort(key=lambda s: -s["mean_trained_ode"])
    lines = [
        f"# Ablation: {suite}",
        "",
        "| rank | arm | mean trained ODE reward | mean final rollout reward | seeds |",
        "| --- | --- | --- | --- | --- |",
    ]
    for rank, s in enumerate(summary, start=1):
        lines.append(
            f"| {rank} | {s['arm']} | {s['mean_trained_ode']:.4f} "
            f"| {s['mean_final_reward']:.4f} | {s['seeds']} |"
        )
    lines.append("")
    (out_dir / "report.md").write_text("\n".join(lines))
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return out_dir
