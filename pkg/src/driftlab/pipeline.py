"""End-to-end experiment pipeline: pretrain, profile, segment, train, eval.

Each stage is a standalone function over a RunConfig plus explicit
inputs, so suites can recombine them (e.g. share one pretrained model
across many training runs). run_pipeline chains all of them into a run
directory; a stage failure leaves a FAILED marker file naming the stage
and raises PipelineError.

Runs are deterministic given (config, seed): every random draw comes
from named child streams of one root, and anything that cannot be
deterministic (wall-clock) goes to timing.json so metrics.csv is
byte-identical across reruns.

metrics.csv columns (one row per optimiser update):
    update            0-based update index
    reward_mean       mean rollout reward of the update's groups
    reward_std        population std of those rewards
    objective         clipped surrogate objective (KL already subtracted)
    surrogate         clipped surrogate before the KL penalty
    kl                mean per-group KL penalty term
    ratio_mean        mean importance ratio over optimised units
    ratio_max         max importance ratio over optimised units
    clip_fraction     fraction of units with |ratio - 1| > clip_range
    grad_norm         pre-clip global gradient norm
    degenerate_groups groups skipped for zero reward spread
    selected          chunk ids optimised this update, pipe-joined
    selection_counts  cumulative per-chunk selection counts, pipe-joined
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, resolve_run_dir, save_config
from .dynamics import DynamicsProfile, l1_rel_profile, sampling_weights, segment_chunks
from .errors import PipelineError
from .flow import ode_sample_batch
from .grpo import ChunkPlan, effective_plan, grpo_update
from .net import ParamVector
from .optim import init_optim
from .rewards import reward_fn
from .rng import RandomStream
from .sde import hybrid_sample_batch, rollout_group

FAILURE_MARKER = "FAILED"

METRICS_HEADER = (
    "update,reward_mean,reward_std,objective,surrogate,kl,ratio_mean,ratio_max,"
    "clip_fraction,grad_norm,degenerate_groups,selected,selection_counts"
)

# fixed child-stream ids of the per-run root stream
_S_PRETRAIN, _S_PROFILE, _S_ROLLOUT, _S_SELECT, _S_EVAL, _S_POST = 1, 2, 3, 4, 5, 6


@dataclass(frozen=True)
class MetricsRow:
    """One optimiser update, as written to metrics.csv (plus wall_clock,
    which goes to timing.json instead to keep the CSV deterministic)."""

    update: int
    reward_mean: float
    reward_std: float
    objective: float
    surrogate: float
    kl: float
    ratio_mean: float
    ratio_max: float
    clip_fraction: float
    grad_norm: float
    degenerate_groups: int
    selected: tuple
    selection_counts: tuple
    wall_clock: float

    def to_csv(self) -> str:
        def f(x):
            return format(float(x), ".12g")

        return ",".join(
            [
                str(self.update),
                f(self.reward_mean),
                f(self.reward_std),
                f(self.objective),
                f(self.surrogate),
                f(self.kl),
                f(self.ratio_mean),
                f(self.ratio_max),
                f(self.clip_fraction),
                f(self.grad_norm),
                str(self.degenerate_groups),
                "|".join(str(j) for j in self.selected),
                "|".join(str(c) for c in self.selection_counts),
            ]
        )


def write_metrics(rows, path) -> Path:
    path = Path(path)
    lines = [METRICS_HEADER] + [row.to_csv() for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_metrics(path) -> list:
    """metrics.csv back as a list of dicts (numbers parsed, lists split)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"unrecognised metrics header in {path}")
    names = lines[0].split(",")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        row = {}
        for name, part in zip(names, parts):
            if name in ("update", "degenerate_groups"):
                row[name] = int(part)
            elif name in ("selected", "selection_counts"):
                row[name] = tuple(int(p) for p in part.split("|")) if part else ()
            else:
                row[name] = float(part)
        out.append(row)
    return out


def stage_pretrain(config: RunConfig, root: RandomStream, run_dir: Path) -> ParamVector:
    """Flow-matching pretraining; writes pretrained.ckpt and loss curve."""
    from .flow import pretrain

    losses = []
    params = pretrain(
        config.dataset(),
        config.pretrain_config(),
        root.spawn(_S_PRETRAIN),
        callback=lambda step, loss: losses.append((step, loss)),
    )
    save_checkpoint(run_dir / "pretrained.ckpt", params)
    lines = ["step,loss"] + [f"{s},{format(l, '.12g')}" for s, l in losses]
    (run_dir / "pretrain_losses.csv").write_text("\n".join(lines) + "\n")
    return params


def collect_profiles(
    config: RunConfig, params: ParamVector, stream: RandomStream
) -> tuple:
    """Stochastic rollouts per condition; returns (per-condition, pooled)."""
    data = config.dataset()
    schedule = config.schedule()
    eta = config.eta
    per_condition = []
    pooled_trajectories = []
    for c in range(data.n_conditions):
        child = stream.spawn(c)
        trajectories = []
        remaining = config.profile_rollouts
        group = max(2, config.group_size)
        batch_index = 0
        while remaining > 0:
            take = max(2, min(group, remaining))
            rolled = rollout_group(
                params, c, take, schedule, eta, child.spawn(batch_index)
            )
            trajectories.extend(rolled.members[:remaining])
            remaining -= take
            batch_index += 1
        per_condition.append(l1_rel_profile(trajectories, condition=c))
        pooled_trajectories.extend(trajectories)
    pooled = l1_rel_profile(pooled_trajectories)
    return per_condition, pooled


def profile_to_dict(profile: DynamicsProfile) -> dict:
    return {
        "condition": profile.condition,
        "n_trajectories": profile.n_trajectories,
        "values": [float(v) for v in profile.values],
    }


def stage_profile(config: RunConfig, params: ParamVector, stream: RandomStream, run_dir: Path, name: str = "profile.json"):
    per_condition, pooled = collect_profiles(config, params, stream)
    blob = {
        "pooled": profile_to_dict(pooled),
        "per_condition": [profile_to_dict(p) for p in per_condition],
    }
    (run_dir / name).write_text(json.dumps(blob, indent=2) + "\n")
    return per_condition, pooled


def stage_segment(config: RunConfig, pooled: DynamicsProfile, run_dir: Path) -> ChunkPlan:
    """Resolve the chunk plan from config (and the profile when dynamic)."""
    plan = config.fixed_plan()
    if plan is None:
        plan = segment_chunks(pooled, config.chunk_count)
    if plan.total != pooled.n_transitions:
        raise ValueError(
            f"plan covers {plan.total} transitions, rollouts have {pooled.n_transitions}"
        )
    if config.weighted:
        plan = plan.with_weights(sampling_weights(pooled, plan))
    blob = {
        "source": config.plan_source,
        "sizes": list(plan.sizes),
        "weights": [float(w) for w in plan.weights],
    }
    (run_dir / "plan.json").write_text(json.dumps(blob, indent=2) + "\n")
    return plan


def stage_train(
    config: RunConfig,
    params: ParamVector,
    plan: ChunkPlan,
    root: RandomStream,
    run_dir: Path,
    selected=None,
) -> tuple:
    """GRPO training loop; writes policy.ckpt and metrics.csv.

    Rollout batches of grad_accum condition groups (conditions round
    robin) are reused for inner_steps consecutive updates. selected
    pins the optimised chunks instead of sampling them.
    """
    data = config.dataset()
    schedule = config.schedule()
    gcfg = config.grpo()
    rfn = reward_fn(config.reward_spec(data))
    reference = params
    n_stochastic = schedule.steps - 1
    eff = effective_plan(plan, config.variant, n_stochastic)
    counts = np.zeros(eff.n_chunks, dtype=int)
    state = init_optim(
        params.values.size,
        learning_rate=gcfg.learning_rate,
        weight_decay=gcfg.weight_decay,
        max_grad_norm=gcfg.max_grad_norm,
    )
    rollout_stream = root.spawn(_S_ROLLOUT)
    select_stream = root.spawn(_S_SELECT)
    rows = []
    update = 0
    round_index = 0
    while update < config.updates:
        groups = []
        for i in range(gcfg.grad_accum):
            c = (round_index * gcfg.grad_accum + i) % data.n_conditions
            groups.append(
                rollout_group(
                    params,
                    c,
                    gcfg.group_size,
                    schedule,
                    gcfg.eta,
                    rollout_stream.spawn(round_index * gcfg.grad_accum + i),
                    rfn,
                )
            )
        for _ in range(gcfg.inner_steps):
            if update >= config.updates:
                break
            started = time.perf_counter()
            params, state, um = grpo_update(
                params,
                groups,
                plan,
                gcfg,
                config.variant,
                state,
                stream=select_stream,
                selected=selected,
                ref_params=reference,
            )
            wall = time.perf_counter() - started
            for j in um.selected:
                counts[j] += 1
            rows.append(
                MetricsRow(
                    update=update,
                    reward_mean=um.reward_mean,
                    reward_std=um.reward_std,
                    objective=um.objective,
                    surrogate=um.surrogate,
                    kl=um.kl,
                    ratio_mean=um.ratio_mean,
                    ratio_max=um.ratio_max,
                    clip_fraction=um.clip_fraction,
                    grad_norm=um.grad_norm,
                    degenerate_groups=um.degenerate_groups,
                    selected=um.selected,
                    selection_counts=tuple(int(c) for c in counts),
                    wall_clock=wall,
                )
            )
            update += 1
        round_index += 1
    save_checkpoint(run_dir / "policy.ckpt", params)
    write_metrics(rows, run_dir / "metrics.csv")
    return params, rows


def stage_eval(
    config: RunConfig,
    trained: ParamVector,
    reference: ParamVector,
    root: RandomStream,
    run_dir: Path,
) -> dict:
    """Deterministic sampling of trained, reference, and hybrid policies.

    The hybrid hands over from the trained to the reference parameters
    after round(hybrid_split * steps) transitions. Writes eval.json
    (mean rewards) and samples.json (the samples themselves).
    """
    data = config.dataset()
    schedule = config.schedule()
    rfn = reward_fn(config.reward_spec(data))
    split = int(round(config.hybrid_split * schedule.steps))
    split = min(max(split, 0), schedule.steps)
    stream = root.spawn(_S_EVAL)
    n = config.eval_samples
    per_condition = []
    samples = []
    for c in range(data.n_conditions):
        x_trained = ode_sample_batch(trained, c, schedule, n, stream.spawn(3 * c))
        x_reference = ode_sample_batch(reference, c, schedule, n, stream.spawn(3 * c + 1))
        x_hybrid = hybrid_sample_batch(
            trained, reference, split, schedule, c, n, stream.spawn(3 * c + 2)
        )
        per_condition.append(
            {
                "condition": c,
                "trained_ode": float(np.mean(rfn(x_trained, c))),
                "reference_ode": float(np.mean(rfn(x_reference, c))),
                "hybrid": float(np.mean(rfn(x_hybrid, c))),
            }
        )
        samples.append(
            {
                "condition": c,
                "trained": x_trained.tolist(),
                "reference": x_reference.tolist(),
                "hybrid": x_hybrid.tolist(),
            }
        )
    overall = {
        key: float(np.mean([row[key] for row in per_condition]))
        for key in ("trained_ode", "reference_ode", "hybrid")
    }
    result = {
        "hybrid_split": split,
        "per_condition": per_condition,
        "overall": overall,
    }
    (run_dir / "eval.json").write_text(json.dumps(result, indent=2) + "\n")
    (run_dir / "samples.json").write_text(
        json.dumps({"samples": samples}, indent=2) + "\n"
    )
    return result


def run_pipeline(config: RunConfig, run_dir=None, seed: int = None, make_plots: bool = True) -> Path:
    """Run every stage into a run directory and return its path.

    A failing stage writes a FAILED marker naming the stage before the
    error is re-raised as PipelineError.
    """
    run_dir = Path(resolve_run_dir(config, run_dir))
    run_dir.mkdir(parents=True, exist_ok=True)
    seed = config.seeds[0] if seed is None else int(seed)
    root = RandomStream(seed)
    timings = {"seed": seed}
    stage = "configure"
    try:
        save_config(config, run_dir / "config.ini")
        started = time.perf_counter()
        stage = "pretrain"
        pretrained = stage_pretrain(config, root, run_dir)
        timings["pretrain_seconds"] = time.perf_counter() - started

        started = time.perf_counter()
        stage = "profile"
        _, pooled = stage_profile(config, pretrained, root.spawn(_S_PROFILE), run_dir)
        timings["profile_seconds"] = time.perf_counter() - started

        stage = "segment"
        plan = stage_segment(config, pooled, run_dir)

        started = time.perf_counter()
        stage = "train"
        trained, rows = stage_train(config, pretrained, plan, root, run_dir)
        timings["train_seconds"] = time.perf_counter() - started
        timings["per_update_seconds"] = [row.wall_clock for row in rows]

        started = time.perf_counter()
        stage = "eval"
        stage_eval(config, trained, pretrained, root, run_dir)
        stage_profile(config, trained, root.spawn(_S_POST), run_dir, name="profile_post.json")
        timings["eval_seconds"] = time.perf_counter() - started

        if make_plots:
            stage = "report"
            from . import report

            report.run_plots(run_dir)
        timings["total_seconds"] = sum(
            v for k, v in timings.items() if isinstance(v, float)
        )
        (run_dir / "timing.json").write_text(json.dumps(timings, indent=2) + "\n")
    except Exception as err:
        (run_dir / FAILURE_MARKER).write_text(f"{stage}: {type(err).__name__}: {err}\n")
        raise PipelineError(f"stage {stage!r} failed: {err}", stage=stage) from err
    return run_dir


def load_run(run_dir) -> dict:
    """Summarise a finished run directory for suites and reports."""
    run_dir = Path(run_dir)
    out = {"dir": run_dir, "failed": (run_dir / FAILURE_MARKER).exists()}
    if (run_dir / "metrics.csv").exists():
        out["metrics"] = read_metrics(run_dir / "metrics.csv")
    if (run_dir / "eval.json").exists():
        out["eval"] = json.loads((run_dir / "eval.json").read_text())
    if (run_dir / "plan.json").exists():
        out["plan"] = json.loads((run_dir / "plan.json").read_text())
    if (run_dir / "policy.ckpt").exists():
        out["policy"] = load_checkpoint(run_dir / "policy.ckpt")
    return out
